#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "medtpe/text_util.hpp"
#include "support/test_util.hpp"

using namespace medtpe;

TEST_CASE("ascii whitespace set") {
  for (const char c : {' ', '\t', '\n', '\r', '\v', '\f'}) {
    CHECK(is_ascii_space(static_cast<unsigned char>(c)));
  }
  CHECK_FALSE(is_ascii_space('a'));
  CHECK_FALSE(is_ascii_space('0'));
  CHECK_FALSE(is_ascii_space(0xA0));  // NBSP lead byte is not ASCII space
}

TEST_CASE("utf8 sequence lengths") {
  CHECK(utf8_sequence_length("a", 0) == 1);
  CHECK(utf8_sequence_length("\xC3\xA9", 0) == 2);          // e-acute
  CHECK(utf8_sequence_length("\xE2\x82\xAC", 0) == 3);      // euro sign
  CHECK(utf8_sequence_length("\xF0\x9D\x84\x9E", 0) == 4);  // G clef

  CHECK(utf8_sequence_length("\x80", 0) == 0);      // stray continuation
  CHECK(utf8_sequence_length("\xC0\x80", 0) == 0);  // overlong NUL
  CHECK(utf8_sequence_length("\xE0\x80\xA0", 0) == 0);      // overlong
  CHECK(utf8_sequence_length("\xED\xA0\x80", 0) == 0);      // surrogate
  CHECK(utf8_sequence_length("\xF4\x90\x80\x80", 0) == 0);  // > U+10FFFF
  CHECK(utf8_sequence_length("\xC3", 0) == 0);              // truncated
  CHECK(utf8_sequence_length("\xFF", 0) == 0);
}

TEST_CASE("utf8 validation and replacement") {
  CHECK(is_valid_utf8("plain ascii"));
  CHECK(is_valid_utf8("caf\xC3\xA9 \xE2\x82\xAC"));
  CHECK_FALSE(is_valid_utf8("bad\xFF"));
  CHECK_FALSE(is_valid_utf8("\xC3"));

  CHECK(utf8_replace_invalid("ok") == "ok");
  CHECK(utf8_replace_invalid("a\xFF\x62") == "a\xEF\xBF\xBD\x62");
  // Each invalid byte is replaced separately.
  CHECK(utf8_replace_invalid("\xFF\xFE") ==
        "\xEF\xBF\xBD\xEF\xBF\xBD");
  const std::string valid = "caf\xC3\xA9";
  CHECK(utf8_replace_invalid(valid) == valid);
}

TEST_CASE("token escaping") {
  CHECK(escape_token("heart") == "heart");
  CHECK(escape_token(" rate") == " rate");
  CHECK(escape_token("\n") == "<0x0A>");
  CHECK(escape_token("<") == "<0x3C>");
  CHECK(escape_token("\x7F") == "<0x7F>");
  CHECK(escape_token("\xFF") == "<0xFF>");
  CHECK(escape_token("caf\xC3\xA9") == "caf\xC3\xA9");

  CHECK(unescape_token("<0x0A>") == "\n");
  CHECK(unescape_token("a<0x00>b") == std::string("a\0b", 3));
  CHECK_THROWS_AS(unescape_token("<0x4"), format_error);
  CHECK_THROWS_AS(unescape_token("<0xZZ>"), format_error);
  CHECK_THROWS_AS(unescape_token("a<b"), format_error);
}

TEST_CASE("token escaping round trips every byte and random strings") {
  for (unsigned b = 0; b < 256; ++b) {
    const std::string raw(1, static_cast<char>(b));
    CHECK(unescape_token(escape_token(raw)) == raw);
    CHECK(is_valid_utf8(escape_token(raw)));
  }
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const std::string raw = testutil::random_bytes(rng, 40);
    const std::string esc = escape_token(raw);
    CHECK(unescape_token(esc) == raw);
    CHECK(is_valid_utf8(esc));
    CHECK(esc.find('\n') == std::string::npos);
  }
}

TEST_CASE("escaping is injective over distinct inputs") {
  std::mt19937_64 rng(11);
  std::vector<std::string> raws;
  std::vector<std::string> escs;
  for (int i = 0; i < 300; ++i) {
    raws.push_back(testutil::random_bytes(rng, 12));
    escs.push_back(escape_token(raws.back()));
  }
  for (std::size_t a = 0; a < raws.size(); ++a) {
    for (std::size_t b = a + 1; b < raws.size(); ++b) {
      if (raws[a] != raws[b]) CHECK(escs[a] != escs[b]);
    }
  }
}

TEST_CASE("hash matches published 64-bit fnv-1a vectors") {
  fnv1a64 h0;
  CHECK(h0.value() == 0xCBF29CE484222325ull);

  fnv1a64 ha;
  ha.update("a");
  CHECK(ha.value() == 0xAF63DC4C8601EC8Cull);

  fnv1a64 hf;
  hf.update("foobar");
  CHECK(hf.value() == 0x85944171F73967E8ull);

  // Incremental updates equal one-shot hashing.
  fnv1a64 h1;
  h1.update("foo");
  h1.update("bar");
  CHECK(h1.value() == hf.value());

  CHECK(hf.hex() == "85944171f73967e8");
  CHECK(h0.hex() == "cbf29ce484222325");
}

namespace {

// Independent digest oracle: re-derive the framed hash byte by byte.
std::uint64_t naive_framed_digest(const std::vector<std::string>& docs) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001B3ull;
  };
  for (const auto& d : docs) {
    std::uint64_t n = d.size();
    for (int k = 0; k < 8; ++k) mix(static_cast<unsigned char>((n >> (8 * k)) & 0xFF));
    for (const char c : d) mix(static_cast<unsigned char>(c));
  }
  return h;
}

std::string to_hex16(std::uint64_t v) {
  static const char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = kHex[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace

TEST_CASE("corpus digest matches an independent recomputation") {
  const std::vector<std::string> docs = {"heart rate", "", "bp 120/80"};
  CHECK(corpus_digest(docs) == to_hex16(naive_framed_digest(docs)));

  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::string> random_docs;
    const std::size_t n = rng() % 6;
    for (std::size_t d = 0; d < n; ++d) {
      random_docs.push_back(testutil::random_bytes(rng, 30));
    }
    CHECK(corpus_digest(random_docs) ==
          to_hex16(naive_framed_digest(random_docs)));
  }
}

TEST_CASE("corpus digest separates document boundaries") {
  // Same concatenated bytes, different framing.
  CHECK(corpus_digest({"ab", "c"}) != corpus_digest({"a", "bc"}));
  CHECK(corpus_digest({"abc"}) != corpus_digest({"ab", "c"}));
  CHECK(corpus_digest({"abc"}) != corpus_digest({"abc", ""}));
  CHECK(corpus_digest({"x", "y"}) == corpus_digest({"x", "y"}));
  CHECK(corpus_digest({}) == "cbf29ce484222325");
}
