#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "medtpe/errors.hpp"

namespace medtpe {

using token_id = std::uint32_t;

constexpr token_id kInvalidToken = static_cast<token_id>(-1);
constexpr std::size_t kByteAlphabetSize = 256;

// One merge rule of the base BPE layer. rank equals the rule's position in
// the merge list; left + right concatenated is always a vocabulary token.
struct MergeRule {
  std::string left;
  std::string right;
  std::uint32_t rank = 0;

  std::string product() const { return left + right; }
};

// Bidirectional token-string <-> token-id map with the 256 single-byte
// tokens and the reserved special tokens as protected subsets. Immutable
// after construction; ids are dense in [0, size()).
class Vocabulary {
public:
  Vocabulary() = default;

  // id_to_token[i] is the raw (unescaped) token string with id i.
  Vocabulary(std::vector<std::string> id_to_token,
             std::unordered_set<std::string> specials)
      : id_to_token_(std::move(id_to_token)), specials_(std::move(specials)) {
    token_to_id_.reserve(id_to_token_.size() * 2);
    for (token_id id = 0; id < id_to_token_.size(); ++id) {
      const std::string& tok = id_to_token_[id];
      if (tok.empty()) {
        throw format_error("empty token string at id " + std::to_string(id));
      }
      if (!token_to_id_.emplace(tok, id).second) {
        throw integrity_error("duplicate token string \"" + tok + "\"");
      }
    }
    for (unsigned b = 0; b < kByteAlphabetSize; ++b) {
      const std::string byte_tok(1, static_cast<char>(b));
      if (!token_to_id_.count(byte_tok)) {
        throw integrity_error("byte alphabet incomplete: missing byte token 0x" +
                              to_hex(b));
      }
    }
    for (const auto& s : specials_) {
      if (!token_to_id_.count(s)) {
        throw integrity_error("special token \"" + s +
                              "\" is not a vocabulary entry");
      }
    }
  }

  std::size_t size() const { return id_to_token_.size(); }

  bool contains(std::string_view tok) const {
    return token_to_id_.find(std::string(tok)) != token_to_id_.end();
  }

  token_id id_of(std::string_view tok) const {
    auto it = token_to_id_.find(std::string(tok));
    if (it == token_to_id_.end()) {
      throw lookup_error("unknown token \"" + std::string(tok) + "\"");
    }
    return it->second;
  }

  token_id find(std::string_view tok) const {
    auto it = token_to_id_.find(std::string(tok));
    return it == token_to_id_.end() ? kInvalidToken : it->second;
  }

  const std::string& token_of(token_id id) const {
    if (id >= id_to_token_.size()) {
      throw lookup_error("token id " + std::to_string(id) +
                         " out of range (vocabulary size " +
                         std::to_string(id_to_token_.size()) + ")");
    }
    return id_to_token_[id];
  }

  bool is_byte_token(std::string_view tok) const { return tok.size() == 1; }

  bool is_byte_token(token_id id) const {
    return id < id_to_token_.size() && id_to_token_[id].size() == 1;
  }

  bool is_special(std::string_view tok) const {
    return specials_.count(std::string(tok)) != 0;
  }

  bool is_special(token_id id) const {
    return id < id_to_token_.size() && is_special(id_to_token_[id]);
  }

  const std::unordered_set<std::string>& specials() const { return specials_; }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
  static std::string to_hex(unsigned b) {
    static const char kHex[] = "0123456789ABCDEF";
    std::string s(2, '0');
    s[0] = kHex[(b >> 4) & 0xF];
    s[1] = kHex[b & 0xF];
    return s;
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, token_id> token_to_id_;
  std::unordered_set<std::string> specials_;
};

}  // namespace medtpe
