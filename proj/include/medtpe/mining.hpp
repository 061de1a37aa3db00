#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/corpus.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

struct MiningConfig {
  unsigned n_max = 2;            // longest N-gram considered, 2..8
  std::uint64_t budget_m = 5000; // replacement budget M
  std::uint64_t min_freq = 2;    // drop candidates rarer than this

  void validate() const {
    if (n_max < 2 || n_max > 8) {
      throw config_error("n_max must lie in [2, 8], got " + std::to_string(n_max));
    }
    if (budget_m < 1) throw config_error("budget must be at least 1");
    if (min_freq < 1) throw config_error("min-freq must be at least 1");
  }
};

// A mined contiguous run of base tokens, scored by frequency times length.
struct TpeCandidate {
  std::string surface;                    // concatenation of constituents
  std::vector<std::string> constituents;  // 2..n_max base token strings
  std::uint64_t freq = 0;
  std::uint64_t score = 0;
};

struct CandidateTable {
  std::vector<TpeCandidate> rows;
};

namespace detail {

// Canonical candidate order: score desc, freq desc, surface asc, then
// constituent split asc. The final key never matters for distinct surfaces;
// it exists so equal-surface, equal-score splits still order totally.
inline bool candidate_less(const TpeCandidate& a, const TpeCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.freq != b.freq) return a.freq > b.freq;
  if (a.surface != b.surface) return a.surface < b.surface;
  return a.constituents < b.constituents;
}

inline std::string window_key(const token_id* ids, unsigned n) {
  std::string key(static_cast<std::size_t>(n) * sizeof(token_id), '\0');
  std::memcpy(key.data(), ids, key.size());
  return key;
}

}  // namespace detail

// Counts every contiguous run of 2..n_max base tokens per document,
// overlapping occurrences included, never crossing document boundaries.
// Runs touching a special token are skipped. Returns the scored table in
// canonical order.
inline CandidateTable count_ngrams(const BaseTokenizer& tok,
                                   const std::vector<std::string>& corpus,
                                   const MiningConfig& cfg,
                                   unsigned threads = 1) {
  cfg.validate();

  const Vocabulary& vocab = tok.vocab();
  std::vector<bool> special_id(vocab.size(), false);
  for (token_id id = 0; id < vocab.size(); ++id) {
    special_id[id] = vocab.is_special(id);
  }

  using CountMap = std::unordered_map<std::string, std::uint64_t>;
  const auto count_range = [&](std::size_t begin, std::size_t end, CountMap& counts) {
    WordCache cache;
    for (std::size_t d = begin; d < end; ++d) {
      const std::vector<token_id> doc_ids = tok.encode(corpus[d], cache);
      // A run extends while no special token interrupts it.
      std::size_t run_start = 0;
      for (std::size_t i = 0; i <= doc_ids.size(); ++i) {
        if (i < doc_ids.size() && !special_id[doc_ids[i]]) continue;
        const std::size_t run_len = i - run_start;
        for (unsigned n = 2; n <= cfg.n_max; ++n) {
          if (run_len < n) break;
          for (std::size_t s = run_start; s + n <= i; ++s) {
            ++counts[detail::window_key(doc_ids.data() + s, n)];
          }
        }
        run_start = i + 1;
      }
    }
  };

  CountMap total;
  threads = resolve_threads(threads);
  if (threads <= 1 || corpus.size() <= 1) {
    count_range(0, corpus.size(), total);
  } else {
    std::vector<CountMap> partial(std::min<std::size_t>(threads, corpus.size()));
    parallel_chunks(corpus.size(), threads,
                    [&](std::size_t c, std::size_t begin, std::size_t end) {
                      count_range(begin, end, partial[c]);
                    });
    for (auto& part : partial) {
      if (total.empty()) {
        total = std::move(part);
        continue;
      }
      for (auto& [key, count] : part) total[key] += count;
    }
  }

  CandidateTable table;
  table.rows.reserve(total.size() / 2);
  for (const auto& [key, freq] : total) {
    if (freq < cfg.min_freq) continue;
    const unsigned n = static_cast<unsigned>(key.size() / sizeof(token_id));
    TpeCandidate cand;
    cand.freq = freq;
    cand.score = freq * n;
    cand.constituents.reserve(n);
    for (unsigned k = 0; k < n; ++k) {
      token_id id;
      std::memcpy(&id, key.data() + k * sizeof(token_id), sizeof(token_id));
      cand.constituents.push_back(vocab.token_of(id));
      cand.surface += cand.constituents.back();
    }
    table.rows.push_back(std::move(cand));
  }
  std::sort(table.rows.begin(), table.rows.end(), detail::candidate_less);
  return table;
}

// Recomputes each row's length-aware score and restores canonical order.
inline CandidateTable score_candidates(CandidateTable table) {
  for (auto& row : table.rows) {
    row.score = row.freq * row.constituents.size();
  }
  std::sort(table.rows.begin(), table.rows.end(), detail::candidate_less);
  return table;
}

// Top-m rows in canonical order with duplicate surfaces collapsed to their
// highest-ranked split, so every selected surface is unique.
inline std::vector<TpeCandidate> select_insertion_set(const CandidateTable& table,
                                                      std::uint64_t m) {
  if (m < 1) throw config_error("insertion budget must be at least 1");
  std::vector<TpeCandidate> out;
  std::unordered_map<std::string, bool> seen;
  for (const TpeCandidate& row : table.rows) {
    if (out.size() == m) break;
    if (!seen.emplace(row.surface, true).second) continue;
    out.push_back(row);
  }
  return out;
}

// Tab-separated export: surface, N, freq, score, constituents joined with the
// unit separator. Token bytes are escaped so tabs and newlines inside tokens
// cannot break the column structure.
inline void write_candidates_tsv(const CandidateTable& table, std::ostream& out) {
  out << "surface\tn\tfreq\tscore\tconstituents\n";
  for (const TpeCandidate& row : table.rows) {
    out << escape_token(row.surface) << '\t' << row.constituents.size() << '\t'
        << row.freq << '\t' << row.score << '\t';
    for (std::size_t i = 0; i < row.constituents.size(); ++i) {
      if (i) out << '\x1f';
      out << escape_token(row.constituents[i]);
    }
    out << '\n';
  }
}

}  // namespace medtpe
