#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {
namespace hf_detail {

// Byte-level BPE files store token bytes through a fixed byte-to-codepoint
// table: printable Latin-1 maps to itself, everything else to 0x100 + k in
// first-gap order. This is its inverse.
inline const std::unordered_map<std::uint32_t, unsigned char>& unicode_to_byte() {
  static const auto table = [] {
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    std::unordered_map<std::uint32_t, unsigned char> inv;
    int next = 0;
    for (int b = 0; b < 256; ++b) {
      const std::uint32_t cp = direct[b] ? static_cast<std::uint32_t>(b)
                                         : static_cast<std::uint32_t>(256 + next++);
      inv.emplace(cp, static_cast<unsigned char>(b));
    }
    return inv;
  }();
  return table;
}

inline std::uint32_t next_codepoint(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) -> std::uint32_t {
    return static_cast<unsigned char>(s[k]);
  };
  const std::uint32_t b0 = byte(i);
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if (b0 < 0x80) {
    cp = b0;
    len = 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    throw format_error("invalid UTF-8 in imported token \"" + s + "\"");
  }
  if (i + len > s.size()) {
    throw format_error("truncated UTF-8 in imported token \"" + s + "\"");
  }
  for (std::size_t k = 1; k < len; ++k) {
    const std::uint32_t bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {
      throw format_error("invalid UTF-8 in imported token \"" + s + "\"");
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

inline std::string decode_token(const std::string& mapped) {
  const auto& inv = unicode_to_byte();
  std::string raw;
  raw.reserve(mapped.size());
  std::size_t i = 0;
  while (i < mapped.size()) {
    const std::uint32_t cp = next_codepoint(mapped, i);
    const auto it = inv.find(cp);
    if (it == inv.end()) {
      throw format_error("codepoint U+" + std::to_string(cp) + " in token \"" +
                         mapped + "\" is outside the byte-level alphabet");
    }
    raw += static_cast<char>(it->second);
  }
  return raw;
}

}  // namespace hf_detail

// Converts a byte-level BPE tokenizer.json (model.vocab / model.merges /
// added_tokens) into this library's format. Added tokens keep their literal
// content; everything else passes through the byte-level decoding.
inline BaseTokenizer import_hf_tokenizer(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw format_error(std::string("tokenizer.json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("model") || !j["model"].is_object()) {
    throw format_error("tokenizer.json: missing model object");
  }
  const auto& model = j["model"];
  if (model.value("type", std::string()) != "BPE") {
    throw format_error("tokenizer.json: model type is not BPE");
  }
  if (!model.contains("vocab") || !model["vocab"].is_object()) {
    throw format_error("tokenizer.json: missing model.vocab");
  }
  if (!model.contains("merges") || !model["merges"].is_array()) {
    throw format_error("tokenizer.json: missing model.merges");
  }

  std::unordered_set<std::string> added;
  std::unordered_set<std::string> specials;
  if (j.contains("added_tokens") && j["added_tokens"].is_array()) {
    for (const auto& t : j["added_tokens"]) {
      if (!t.is_object() || !t.contains("content")) continue;
      const std::string content = t["content"].get<std::string>();
      added.insert(content);
      if (t.value("special", false)) specials.insert(content);
    }
  }

  const auto& vocab = model["vocab"];
  std::vector<std::string> id_to_token(vocab.size());
  std::vector<bool> seen(vocab.size(), false);
  for (auto it = vocab.begin(); it != vocab.end(); ++it) {
    if (!it.value().is_number_unsigned()) {
      throw format_error("tokenizer.json: id of \"" + it.key() +
                         "\" is not an unsigned integer");
    }
    const std::uint64_t id = it.value().get<std::uint64_t>();
    if (id >= id_to_token.size()) {
      throw format_error("tokenizer.json: ids are not dense (id " +
                         std::to_string(id) + " with " +
                         std::to_string(id_to_token.size()) + " entries)");
    }
    if (seen[id]) {
      throw format_error("tokenizer.json: duplicate id " + std::to_string(id));
    }
    seen[id] = true;
    id_to_token[id] =
        added.count(it.key()) ? it.key() : hf_detail::decode_token(it.key());
  }

  std::vector<MergeRule> merges;
  merges.reserve(model["merges"].size());
  for (const auto& m : model["merges"]) {
    MergeRule rule;
    if (m.is_string()) {
      const std::string line = m.get<std::string>();
      const std::size_t sp = line.find(' ');
      if (sp == std::string::npos) {
        throw format_error("tokenizer.json: merge \"" + line +
                           "\" has no separator");
      }
      rule.left = hf_detail::decode_token(line.substr(0, sp));
      rule.right = hf_detail::decode_token(line.substr(sp + 1));
    } else if (m.is_array() && m.size() == 2 && m[0].is_string() &&
               m[1].is_string()) {
      rule.left = hf_detail::decode_token(m[0].get<std::string>());
      rule.right = hf_detail::decode_token(m[1].get<std::string>());
    } else {
      throw format_error("tokenizer.json: merge entries must be strings or pairs");
    }
    rule.rank = static_cast<std::uint32_t>(merges.size());
    merges.push_back(std::move(rule));
  }

  return BaseTokenizer(Vocabulary(std::move(id_to_token), std::move(specials)),
                       std::move(merges));
}

}  // namespace medtpe
