#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "medtpe/errors.hpp"

namespace medtpe {

// ASCII whitespace set used by the pre-tokenizer. Locale-free on purpose;
// multi-byte UTF-8 sequences never contain these bytes.
inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Returns the length (1..4) of the valid UTF-8 sequence starting at s[i],
// or 0 if the bytes at s[i] do not start a valid sequence.
inline std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return 1;
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1Fu;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0Fu;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07u;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3Fu);
  }
  // Reject overlong forms, surrogates and out-of-range code points.
  if (len == 2 && cp < 0x80) return 0;
  if (len == 3 && cp < 0x800) return 0;
  if (len == 4 && cp < 0x10000) return 0;
  if (cp >= 0xD800 && cp <= 0xDFFF) return 0;
  if (cp > 0x10FFFF) return 0;
  return len;
}

inline bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t len = utf8_sequence_length(s, i);
    if (len == 0) return false;
    i += len;
  }
  return true;
}

// Replaces every invalid byte with U+FFFD. Used only by the explicit
// permissive decode mode.
inline std::string utf8_replace_invalid(std::string_view s) {
  static const char kReplacement[] = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t len = utf8_sequence_length(s, i);
    if (len == 0) {
      out.append(kReplacement, 3);
      ++i;
    } else {
      out.append(s.substr(i, len));
      i += len;
    }
  }
  return out;
}

// Token strings in tokenizer files are UTF-8 with awkward bytes escaped as
// <0xNN>. We escape '<' itself, control bytes, and any byte that is not
// part of a valid UTF-8 sequence, which makes the escaping injective and
// keeps every emitted string valid UTF-8 for the JSON layer.
inline std::string escape_token(std::string_view raw) {
  static const char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto b = static_cast<unsigned char>(raw[i]);
    std::size_t len = (b < 0x80) ? 1 : utf8_sequence_length(raw, i);
    const bool printable_ascii = b >= 0x20 && b != 0x7F && b != '<';
    if (len == 1 && b < 0x80 && printable_ascii) {
      out.push_back(static_cast<char>(b));
      ++i;
    } else if (len >= 2) {
      out.append(raw.substr(i, len));
      i += len;
    } else {
      out.push_back('<');
      out.push_back('0');
      out.push_back('x');
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xF]);
      out.push_back('>');
      ++i;
    }
  }
  return out;
}

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Inverse of escape_token. A raw '<' never appears in escaped text, so any
// '<' must open a well-formed <0xNN> escape.
inline std::string unescape_token(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  std::size_t i = 0;
  while (i < escaped.size()) {
    const char c = escaped[i];
    if (c != '<') {
      out.push_back(c);
      ++i;
      continue;
    }
    if (i + 5 >= escaped.size() || escaped[i + 1] != '0' ||
        escaped[i + 2] != 'x' || escaped[i + 5] != '>') {
      throw format_error("bad token escape at offset " + std::to_string(i) +
                         " in \"" + std::string(escaped) + "\"");
    }
    const int hi = hex_digit(escaped[i + 3]);
    const int lo = hex_digit(escaped[i + 4]);
    if (hi < 0 || lo < 0) {
      throw format_error("bad hex digits in token escape in \"" +
                         std::string(escaped) + "\"");
    }
    out.push_back(static_cast<char>((hi << 4) | lo));
    i += 6;
  }
  return out;
}

// FNV-1a 64-bit over length-framed document contents. Stable across runs
// and platforms; used to fingerprint corpora in file metadata.
class fnv1a64 {
public:
  void update(std::string_view data) {
    for (const char c : data) {
      hash_ ^= static_cast<unsigned char>(c);
      hash_ *= 0x100000001B3ull;
    }
  }

  void update_framed(std::string_view doc) {
    std::uint64_t n = doc.size();
    char frame[8];
    for (int k = 0; k < 8; ++k) frame[k] = static_cast<char>((n >> (8 * k)) & 0xFF);
    update(std::string_view(frame, 8));
    update(doc);
  }

  std::uint64_t value() const { return hash_; }

  std::string hex() const {
    static const char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = hash_;
    for (int k = 15; k >= 0; --k) {
      out[static_cast<std::size_t>(k)] = kHex[v & 0xF];
      v >>= 4;
    }
    return out;
  }

private:
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

inline std::string corpus_digest(const std::vector<std::string>& docs) {
  fnv1a64 h;
  for (const auto& d : docs) h.update_framed(d);
  return h.hex();
}

}  // namespace medtpe
