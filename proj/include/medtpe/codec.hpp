#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/surgery.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

struct EncodedSequence {
  std::vector<token_id> ids;      // over V★
  std::uint64_t surface_len = 0;  // byte length of the source text
  std::uint64_t token_len = 0;    // |ids|
};

// Layered encoder over an immutable MedTpeVocabulary. Encoding runs three
// stages: base BPE, eviction fallback (evicted tokens re-expressed through
// their decomposition), then a left-to-right longest-match scan that fuses
// token runs whose merge-path pairs all sit in the TPE table and whose full
// concatenation is an inserted surface. Matching works on token byte
// strings, interned once here into dense symbols so the scan does hash
// probes on integer pairs only. Lookahead is capped at n_max tokens, which
// bounds the whole scan at O(n · n_max).
class TpeEncoder {
public:
  explicit TpeEncoder(const MedTpeVocabulary& v) : v_(&v) {
    const Vocabulary& vocab = v.vocab();
    const Vocabulary& base_vocab = v.base().vocab();

    // Stage-2 table: every base id maps to the id sequence it contributes
    // after eviction fallback (itself, unless evicted).
    expansion_.resize(base_vocab.size());
    for (token_id id = 0; id < base_vocab.size(); ++id) {
      const std::string& tok = base_vocab.token_of(id);
      if (v.is_evicted(tok)) {
        for (const std::string& part : v.decomposition_of(tok)) {
          expansion_[id].push_back(vocab.id_of(part));
        }
      } else {
        expansion_[id].push_back(vocab.id_of(tok));
      }
    }

    // Stage-3 automaton: states are interned byte strings; a transition
    // (state, next token) exists per TPE merge pair; accepting states are
    // the inserted surfaces.
    id_to_sym_.resize(vocab.size());
    for (token_id id = 0; id < vocab.size(); ++id) {
      id_to_sym_[id] = intern(vocab.token_of(id));
    }
    for (const auto& [left, right] : v.tpe_merges().pairs) {
      const std::uint32_t sl = intern(left);
      const std::uint32_t sr = intern(right);
      const std::uint32_t sp = intern(left + right);
      transitions_.emplace(detail::pack_pair(sl, sr), sp);
    }
    for (const std::string& surface : v.insertion_surfaces()) {
      accepting_.emplace(intern(surface), vocab.id_of(surface));
    }
  }

  const MedTpeVocabulary& vocabulary() const { return *v_; }

  EncodedSequence encode(std::string_view text) const {
    WordCache cache;
    return encode(text, cache);
  }

  EncodedSequence encode(std::string_view text, WordCache& cache) const {
    EncodedSequence out;
    out.surface_len = text.size();
    const std::vector<token_id> base_ids = v_->base().encode(text, cache);
    out.ids = greedy_merge(fallback_expand(base_ids));
    out.token_len = out.ids.size();
    return out;
  }

  // Stages 2+3 over an already base-encoded stream.
  std::vector<token_id> encode_ids(const std::vector<token_id>& base_ids) const {
    return greedy_merge(fallback_expand(base_ids));
  }

  // Stage 2 alone: base ids with every evicted token replaced by its
  // decomposition; output ids live in V★.
  std::vector<token_id> fallback_expand(const std::vector<token_id>& base_ids) const {
    std::vector<token_id> out;
    out.reserve(base_ids.size());
    for (const token_id id : base_ids) {
      if (id >= expansion_.size()) {
        throw lookup_error("base token id " + std::to_string(id) +
                           " is out of range");
      }
      const auto& parts = expansion_[id];
      out.insert(out.end(), parts.begin(), parts.end());
    }
    return out;
  }

  // Stage 3 alone: at each position, follow transitions up to n_max tokens
  // ahead, remember the farthest accepting state, and emit either that
  // composite or the lone token.
  std::vector<token_id> greedy_merge(const std::vector<token_id>& ids) const {
    std::vector<token_id> out;
    out.reserve(ids.size());
    const std::size_t n = ids.size();
    const std::size_t n_max = v_->n_max();
    std::size_t i = 0;
    while (i < n) {
      if (ids[i] >= id_to_sym_.size()) {
        throw lookup_error("token id " + std::to_string(ids[i]) +
                           " is out of range");
      }
      std::uint32_t state = id_to_sym_[ids[i]];
      std::size_t best_len = 1;
      token_id best_emit = ids[i];
      const std::size_t limit = std::min(n, i + n_max);
      for (std::size_t j = i + 1; j < limit; ++j) {
        if (ids[j] >= id_to_sym_.size()) {
          throw lookup_error("token id " + std::to_string(ids[j]) +
                             " is out of range");
        }
        const auto it =
            transitions_.find(detail::pack_pair(state, id_to_sym_[ids[j]]));
        if (it == transitions_.end()) break;
        state = it->second;
        const auto acc = accepting_.find(state);
        if (acc != accepting_.end()) {
          best_len = j - i + 1;
          best_emit = acc->second;
        }
      }
      out.push_back(best_emit);
      i += best_len;
    }
    return out;
  }

private:
  std::uint32_t intern(const std::string& s) {
    const auto [it, inserted] =
        sym_of_.emplace(s, static_cast<std::uint32_t>(sym_of_.size()));
    return it->second;
  }

  const MedTpeVocabulary* v_;
  std::vector<std::vector<token_id>> expansion_;
  std::vector<std::uint32_t> id_to_sym_;
  std::unordered_map<std::string, std::uint32_t> sym_of_;
  std::unordered_map<std::uint64_t, std::uint32_t> transitions_;
  std::unordered_map<std::uint32_t, token_id> accepting_;
};

inline EncodedSequence medtpe_encode(const MedTpeVocabulary& v,
                                     std::string_view text) {
  return TpeEncoder(v).encode(text);
}

inline std::string medtpe_decode(const MedTpeVocabulary& v,
                                 const std::vector<token_id>& ids,
                                 decode_mode mode = decode_mode::strict) {
  std::string out;
  for (const token_id id : ids) out += v.vocab().token_of(id);
  if (mode == decode_mode::strict) {
    if (!is_valid_utf8(out)) {
      throw decode_error("decoded bytes are not valid UTF-8");
    }
    return out;
  }
  return utf8_replace_invalid(out);
}

// Testing oracle: the same three stages written as plainly as possible —
// string concatenation, a pair set, and a surface map, probing span lengths
// from longest to shortest at each position. No interning, no automaton.
inline EncodedSequence reference_encode(const MedTpeVocabulary& v,
                                        std::string_view text) {
  const Vocabulary& vocab = v.vocab();
  const Vocabulary& base_vocab = v.base().vocab();

  std::vector<token_id> inter;
  for (const token_id id : v.base().encode(text)) {
    const std::string& tok = base_vocab.token_of(id);
    if (v.is_evicted(tok)) {
      for (const std::string& part : v.decomposition_of(tok)) {
        inter.push_back(vocab.id_of(part));
      }
    } else {
      inter.push_back(vocab.id_of(tok));
    }
  }

  std::set<std::pair<std::string, std::string>> pair_set(
      v.tpe_merges().pairs.begin(), v.tpe_merges().pairs.end());
  std::unordered_map<std::string, token_id> surface_ids;
  for (const std::string& s : v.insertion_surfaces()) {
    surface_ids.emplace(s, vocab.id_of(s));
  }

  EncodedSequence out;
  out.surface_len = text.size();
  const std::size_t n = inter.size();
  std::size_t i = 0;
  while (i < n) {
    bool emitted = false;
    const std::size_t longest = std::min<std::size_t>(v.n_max(), n - i);
    for (std::size_t len = longest; len >= 2 && !emitted; --len) {
      std::string span = vocab.token_of(inter[i]);
      bool ok = true;
      for (std::size_t j = i + 1; j < i + len; ++j) {
        const std::string& next = vocab.token_of(inter[j]);
        if (!pair_set.count({span, next})) {
          ok = false;
          break;
        }
        span += next;
      }
      if (!ok) continue;
      const auto it = surface_ids.find(span);
      if (it == surface_ids.end()) continue;
      out.ids.push_back(it->second);
      i += len;
      emitted = true;
    }
    if (!emitted) {
      out.ids.push_back(inter[i]);
      ++i;
    }
  }
  out.token_len = out.ids.size();
  return out;
}

// Compact id frame: magic "MTPE", one version byte, little-endian u32 count,
// then count little-endian u32 ids.
inline void write_id_frame(std::ostream& out, const std::vector<token_id>& ids) {
  out.write("MTPE", 4);
  const char version = 1;
  out.put(version);
  const auto put_u32 = [&](std::uint32_t v) {
    char buf[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff),
                   static_cast<char>((v >> 24) & 0xff)};
    out.write(buf, 4);
  };
  put_u32(static_cast<std::uint32_t>(ids.size()));
  for (const token_id id : ids) put_u32(id);
  if (!out.good()) throw io_error("failed writing id frame");
}

inline std::vector<token_id> read_id_frame(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "MTPE", 4) != 0) {
    throw format_error("id frame lacks the MTPE magic");
  }
  const int version = in.get();
  if (version != 1) {
    throw format_error("unsupported id frame version " + std::to_string(version));
  }
  const auto get_u32 = [&]() -> std::uint32_t {
    char buf[4];
    in.read(buf, 4);
    if (in.gcount() != 4) throw format_error("truncated id frame");
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[0])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[3])) << 24);
  };
  const std::uint32_t count = get_u32();
  std::vector<token_id> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) ids.push_back(get_u32());
  return ids;
}

}  // namespace medtpe
