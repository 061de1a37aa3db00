#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medtpe/errors.hpp"
#include "medtpe/text_util.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

using ordered_json = nlohmann::ordered_json;

enum class decode_mode {
  strict,   // invalid UTF-8 output raises decode_error
  replace,  // invalid bytes become U+FFFD (explicit opt-in)
};

namespace detail {

inline std::uint64_t pack_pair(token_id a, token_id b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  const std::size_t end = std::min(offset, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// Parses JSON while rejecting duplicate object keys, which nlohmann would
// otherwise collapse silently. Parse errors are rewritten with a line number.
inline ordered_json parse_json_checked(const std::string& text,
                                       const std::string& origin) {
  std::vector<std::unordered_set<std::string>> key_stack;
  ordered_json::parser_callback_t cb =
      [&](int /*depth*/, ordered_json::parse_event_t event, ordered_json& parsed) {
        switch (event) {
          case ordered_json::parse_event_t::object_start:
            key_stack.emplace_back();
            break;
          case ordered_json::parse_event_t::object_end:
            key_stack.pop_back();
            break;
          case ordered_json::parse_event_t::key: {
            const auto key = parsed.get<std::string>();
            if (!key_stack.back().insert(key).second) {
              throw integrity_error(origin + ": duplicate key \"" + key + "\"");
            }
            break;
          }
          default:
            break;
        }
        return true;
      };
  try {
    return ordered_json::parse(text, cb);
  } catch (const ordered_json::parse_error& e) {
    throw format_error(origin + " line " +
                       std::to_string(line_of_offset(text, e.byte)) + ": " +
                       e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw io_error("failed reading " + path);
  return buf.str();
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out.good()) throw io_error("failed writing " + path);
}

}  // namespace detail

// Splits text into pre-tokens at whitespace boundaries. Each whitespace run
// attaches as a prefix of the following pre-token; a trailing run forms its
// own pre-token. Concatenating the pieces reproduces the input bytes.
inline std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i])))
      ++i;
    while (i < text.size() && !is_ascii_space(static_cast<unsigned char>(text[i])))
      ++i;
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

// Per-corpus memo of pre-token -> encoded ids. Callers own one per thread;
// the tokenizer itself stays stateless.
class WordCache {
public:
  const std::vector<token_id>* find(std::string_view word) const {
    auto it = map_.find(std::string(word));
    return it == map_.end() ? nullptr : &it->second;
  }

  void insert(std::string_view word, std::vector<token_id> ids) {
    map_.emplace(std::string(word), std::move(ids));
  }

  std::size_t size() const { return map_.size(); }

private:
  std::unordered_map<std::string, std::vector<token_id>> map_;
};

// Byte-level BPE tokenizer: 256 byte tokens as the irreducible alphabet, a
// rank-ordered merge list, and a producer index exposing each token's
// derivation. Immutable after construction; encode/decode are pure.
class BaseTokenizer {
public:
  BaseTokenizer() = default;

  BaseTokenizer(Vocabulary vocab, std::vector<MergeRule> merges)
      : vocab_(std::move(vocab)), merges_(std::move(merges)) {
    build_indexes();
    validate();
  }

  static BaseTokenizer load(const std::string& path) {
    return from_json_text(detail::read_file(path), path);
  }

  static BaseTokenizer from_json_text(const std::string& text,
                                      const std::string& origin = "<memory>") {
    const ordered_json j = detail::parse_json_checked(text, origin);
    if (!j.is_object()) throw format_error(origin + ": top level must be an object");
    return from_fields(j, origin);
  }

  void save(const std::string& path) const {
    detail::write_file(path, to_json_text());
  }

  // Canonical serialization: vocab sorted by id, merges in rank order,
  // special tokens sorted by id. Loading this text reproduces the tokenizer
  // and re-serializing it is byte-stable.
  std::string to_json_text() const {
    ordered_json j = ordered_json::object();
    j["vocab"] = vocab_fields();
    j["merges"] = merge_fields();
    j["special_tokens"] = special_fields();
    return j.dump(2) + "\n";
  }

  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<MergeRule>& merges() const { return merges_; }

  bool has_producer(std::string_view tok) const {
    return producer_index_.count(std::string(tok)) != 0;
  }

  const MergeRule& producer(std::string_view tok) const {
    auto it = producer_index_.find(std::string(tok));
    if (it == producer_index_.end()) {
      throw lookup_error("token \"" + std::string(tok) + "\" has no producing rule");
    }
    return merges_[it->second];
  }

  std::vector<token_id> encode(std::string_view text) const {
    std::vector<token_id> out;
    out.reserve(text.size() / 3 + 1);
    WordCache cache;
    encode_into(text, out, &cache);
    return out;
  }

  std::vector<token_id> encode(std::string_view text, WordCache& cache) const {
    std::vector<token_id> out;
    out.reserve(text.size() / 3 + 1);
    encode_into(text, out, &cache);
    return out;
  }

  std::string decode(const std::vector<token_id>& ids,
                     decode_mode mode = decode_mode::strict) const {
    std::string out;
    std::size_t total = 0;
    for (const token_id id : ids) total += vocab_.token_of(id).size();
    out.reserve(total);
    for (const token_id id : ids) out += vocab_.token_of(id);
    if (mode == decode_mode::strict) {
      if (!is_valid_utf8(out)) {
        throw decode_error("decoded bytes are not valid UTF-8");
      }
      return out;
    }
    return utf8_replace_invalid(out);
  }

  // Full recursive derivation of a token down to byte-alphabet leaves, in
  // bottom-up application order. Byte and special tokens yield an empty list.
  std::vector<std::pair<std::string, std::string>> merge_path(
      std::string_view tok) const {
    if (!vocab_.contains(tok)) {
      throw lookup_error("unknown token \"" + std::string(tok) + "\"");
    }
    std::vector<std::pair<std::string, std::string>> out;
    expand_path(std::string(tok), out, 0);
    return out;
  }

private:
  static BaseTokenizer from_fields(const ordered_json& j, const std::string& origin) {
    if (!j.contains("vocab") || !j["vocab"].is_object()) {
      throw format_error(origin + ": missing or non-object \"vocab\" field");
    }
    if (!j.contains("merges") || !j["merges"].is_array()) {
      throw format_error(origin + ": missing or non-array \"merges\" field");
    }
    if (!j.contains("special_tokens") || !j["special_tokens"].is_array()) {
      throw format_error(origin + ": missing or non-array \"special_tokens\" field");
    }

    const auto& vocab_obj = j["vocab"];
    std::vector<std::string> id_to_token(vocab_obj.size());
    std::vector<bool> seen(vocab_obj.size(), false);
    for (const auto& [escaped, id_value] : vocab_obj.items()) {
      if (!id_value.is_number_unsigned()) {
        throw format_error(origin + ": vocab entry \"" + escaped +
                           "\" has a non-integer id");
      }
      const std::uint64_t id = id_value.get<std::uint64_t>();
      if (id >= vocab_obj.size()) {
        throw integrity_error(origin + ": vocab ids are not dense: id " +
                              std::to_string(id) + " with " +
                              std::to_string(vocab_obj.size()) + " entries");
      }
      if (seen[id]) {
        throw integrity_error(origin + ": duplicate vocab id " + std::to_string(id));
      }
      seen[id] = true;
      id_to_token[id] = unescape_token(escaped);
    }

    std::unordered_set<std::string> specials;
    for (const auto& s : j["special_tokens"]) {
      if (!s.is_string()) {
        throw format_error(origin + ": special_tokens entries must be strings");
      }
      specials.insert(unescape_token(s.get<std::string>()));
    }

    std::vector<MergeRule> merges;
    merges.reserve(j["merges"].size());
    for (const auto& m : j["merges"]) {
      if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string()) {
        throw format_error(origin + ": merges entry " +
                           std::to_string(merges.size()) +
                           " must be a two-element string array");
      }
      MergeRule rule;
      rule.left = unescape_token(m[0].get<std::string>());
      rule.right = unescape_token(m[1].get<std::string>());
      rule.rank = static_cast<std::uint32_t>(merges.size());
      merges.push_back(std::move(rule));
    }

    return BaseTokenizer(Vocabulary(std::move(id_to_token), std::move(specials)),
                         std::move(merges));
  }

  ordered_json vocab_fields() const {
    ordered_json obj = ordered_json::object();
    for (token_id id = 0; id < vocab_.size(); ++id) {
      obj[escape_token(vocab_.token_of(id))] = id;
    }
    return obj;
  }

  ordered_json merge_fields() const {
    ordered_json arr = ordered_json::array();
    for (const auto& m : merges_) {
      arr.push_back(ordered_json::array({escape_token(m.left), escape_token(m.right)}));
    }
    return arr;
  }

  ordered_json special_fields() const {
    std::vector<std::string> specials(vocab_.specials().begin(),
                                      vocab_.specials().end());
    std::sort(specials.begin(), specials.end(),
              [&](const std::string& a, const std::string& b) {
                return vocab_.id_of(a) < vocab_.id_of(b);
              });
    ordered_json arr = ordered_json::array();
    for (const auto& s : specials) arr.push_back(escape_token(s));
    return arr;
  }

  void build_indexes() {
    for (unsigned b = 0; b < kByteAlphabetSize; ++b) {
      byte_ids_[b] = vocab_.id_of(std::string(1, static_cast<char>(b)));
    }
    pair_ranks_.reserve(merges_.size() * 2);
    producer_index_.reserve(merges_.size() * 2);
    for (std::uint32_t r = 0; r < merges_.size(); ++r) {
      const MergeRule& rule = merges_[r];
      const token_id left = vocab_.find(rule.left);
      const token_id right = vocab_.find(rule.right);
      if (left == kInvalidToken) {
        throw integrity_error("merge rule " + std::to_string(r) +
                              " references unknown token \"" + rule.left + "\"");
      }
      if (right == kInvalidToken) {
        throw integrity_error("merge rule " + std::to_string(r) +
                              " references unknown token \"" + rule.right + "\"");
      }
      if (vocab_.is_special(rule.left) || vocab_.is_special(rule.right)) {
        throw integrity_error("merge rule " + std::to_string(r) +
                              " references a special token");
      }
      const std::string product = rule.product();
      const token_id product_id = vocab_.find(product);
      if (product_id == kInvalidToken) {
        throw integrity_error("merge rule " + std::to_string(r) + " (\"" +
                              rule.left + "\", \"" + rule.right +
                              "\") produces \"" + product +
                              "\" which is not a vocabulary token");
      }
      if (vocab_.is_special(product)) {
        throw integrity_error("merge rule " + std::to_string(r) +
                              " produces special token \"" + product + "\"");
      }
      if (!producer_index_.emplace(product, r).second) {
        throw integrity_error("token \"" + product +
                              "\" is produced by more than one merge rule");
      }
      pair_ranks_.emplace(detail::pack_pair(left, right),
                          PairTarget{r, product_id});
    }
  }

  void validate() const {
    // Replaying every merge from the byte alphabet must regenerate exactly
    // the non-special entries: each non-byte, non-special token needs its
    // one producing rule (uniqueness is enforced while indexing).
    for (token_id id = 0; id < vocab_.size(); ++id) {
      const std::string& tok = vocab_.token_of(id);
      if (vocab_.is_byte_token(tok) || vocab_.is_special(tok)) continue;
      if (!producer_index_.count(tok)) {
        throw integrity_error("token \"" + tok +
                              "\" is neither a byte, a special, nor a merge product");
      }
    }
  }

  void encode_into(std::string_view text, std::vector<token_id>& out,
                   WordCache* cache) const {
    for (const std::string_view piece : pretokenize(text)) {
      if (cache != nullptr) {
        if (const auto* hit = cache->find(piece)) {
          out.insert(out.end(), hit->begin(), hit->end());
          continue;
        }
        std::vector<token_id> ids = encode_word(piece);
        out.insert(out.end(), ids.begin(), ids.end());
        cache->insert(piece, std::move(ids));
      } else {
        const std::vector<token_id> ids = encode_word(piece);
        out.insert(out.end(), ids.begin(), ids.end());
      }
    }
  }

  // Classic greedy BPE within one pre-token: repeatedly apply the
  // lowest-rank applicable merge to all its occurrences, left to right.
  std::vector<token_id> encode_word(std::string_view piece) const {
    std::vector<token_id> syms;
    syms.reserve(piece.size());
    for (const char c : piece) {
      syms.push_back(byte_ids_[static_cast<unsigned char>(c)]);
    }
    while (syms.size() >= 2) {
      std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
      token_id best_product = kInvalidToken;
      std::uint64_t best_key = 0;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const std::uint64_t key = detail::pack_pair(syms[i], syms[i + 1]);
        const auto it = pair_ranks_.find(key);
        if (it != pair_ranks_.end() && it->second.rank < best_rank) {
          best_rank = it->second.rank;
          best_product = it->second.product;
          best_key = key;
        }
      }
      if (best_product == kInvalidToken) break;
      std::size_t w = 0;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() &&
            detail::pack_pair(syms[i], syms[i + 1]) == best_key) {
          syms[w++] = best_product;
          i += 2;
        } else {
          syms[w++] = syms[i++];
        }
      }
      syms.resize(w);
    }
    return syms;
  }

  void expand_path(const std::string& tok,
                   std::vector<std::pair<std::string, std::string>>& out,
                   std::size_t depth) const {
    // Any legitimate derivation visits strictly growing strings, so its
    // depth is bounded by the vocabulary size.
    if (depth > vocab_.size()) {
      throw integrity_error("merge derivation of \"" + tok + "\" does not terminate");
    }
    if (vocab_.is_byte_token(tok) || vocab_.is_special(tok)) return;
    const MergeRule& rule = producer(tok);
    expand_path(rule.left, out, depth + 1);
    expand_path(rule.right, out, depth + 1);
    out.emplace_back(rule.left, rule.right);
  }

  struct PairTarget {
    std::uint32_t rank;
    token_id product;
  };

  Vocabulary vocab_;
  std::vector<MergeRule> merges_;
  std::unordered_map<std::string, std::uint32_t> producer_index_;
  std::unordered_map<std::uint64_t, PairTarget> pair_ranks_;
  token_id byte_ids_[kByteAlphabetSize] = {};
};

}  // namespace medtpe
