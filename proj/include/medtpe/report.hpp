#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medtpe/codec.hpp"
#include "medtpe/corpus.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/mining.hpp"
#include "medtpe/surgery.hpp"

namespace medtpe {

struct DocLengths {
  std::uint64_t base_len = 0;
  std::uint64_t medtpe_len = 0;
};

struct CompressionReport {
  std::uint64_t docs = 0;
  std::uint64_t base_tokens = 0;
  std::uint64_t medtpe_tokens = 0;
  double cr = 0.0;  // 1 − medtpe/base
  std::vector<DocLengths> per_doc;
  double elapsed_encode_seconds = 0.0;
};

struct SweepCell {
  unsigned n_max = 2;
  std::uint64_t budget_m = 0;
  bool feasible = true;
  double cr = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> grid;
  std::string corpus_digest;
};

struct BenchRow {
  std::uint64_t n_bytes = 0;
  std::uint64_t tokens = 0;
  double seconds = 0.0;       // median over repeats
  double tokens_per_sec = 0.0;
};

namespace detail {

inline double elapsed_seconds(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - from)
      .count();
}

}  // namespace detail

// Encodes every document with both tokenizers. The recorded wall time covers
// the MedTPE pass only. Per-document lengths are kept so the headline ratio
// can be re-derived and cross-checked.
inline CompressionReport compression_report(const MedTpeVocabulary& v,
                                            const std::vector<std::string>& corpus,
                                            unsigned threads = 1) {
  CompressionReport report;
  report.docs = corpus.size();
  report.per_doc.resize(corpus.size());

  {
    WordCache cache;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      report.per_doc[d].base_len = v.base().encode(corpus[d], cache).size();
    }
  }

  const TpeEncoder encoder(v);
  const auto start = std::chrono::steady_clock::now();
  threads = resolve_threads(threads);
  if (threads <= 1 || corpus.size() <= 1) {
    WordCache cache;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      report.per_doc[d].medtpe_len = encoder.encode(corpus[d], cache).token_len;
    }
  } else {
    parallel_chunks(corpus.size(), threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                      WordCache cache;
                      for (std::size_t d = begin; d < end; ++d) {
                        report.per_doc[d].medtpe_len =
                            encoder.encode(corpus[d], cache).token_len;
                      }
                    });
  }
  report.elapsed_encode_seconds = detail::elapsed_seconds(start);

  for (const DocLengths& dl : report.per_doc) {
    report.base_tokens += dl.base_len;
    report.medtpe_tokens += dl.medtpe_len;
  }
  if (report.base_tokens > 0) {
    report.cr = 1.0 - static_cast<double>(report.medtpe_tokens) /
                          static_cast<double>(report.base_tokens);
  }
  return report;
}

// One full grid: each n_max mines once; each budget runs surgery against
// shared frequency counts and scores compression on pre-encoded base id
// streams, so every cell's ratio matches a standalone pipeline run. Budgets
// a cell cannot honor are recorded infeasible rather than aborting the
// sweep. Budget 0 short-circuits to the identity tokenizer.
inline SweepResult budget_sweep(const BaseTokenizer& base,
                                const std::vector<std::string>& corpus,
                                const std::vector<unsigned>& n_max_list,
                                const std::vector<std::uint64_t>& budget_list,
                                std::uint64_t min_freq = 2,
                                unsigned threads = 1) {
  if (n_max_list.empty() || budget_list.empty()) {
    throw config_error("sweep needs at least one n_max and one budget");
  }

  SweepResult result;
  result.corpus_digest = corpus_digest(corpus);

  std::vector<std::vector<token_id>> base_streams;
  base_streams.reserve(corpus.size());
  std::uint64_t base_total = 0;
  {
    WordCache cache;
    for (const std::string& doc : corpus) {
      base_streams.push_back(base.encode(doc, cache));
      base_total += base_streams.back().size();
    }
  }
  const auto freqs = token_frequencies(base, corpus, threads);

  for (const unsigned n_max : n_max_list) {
    MiningConfig mine_cfg;
    mine_cfg.n_max = n_max;
    mine_cfg.min_freq = min_freq;
    mine_cfg.validate();
    const CandidateTable table = count_ngrams(base, corpus, mine_cfg, threads);

    for (const std::uint64_t budget : budget_list) {
      SweepCell cell;
      cell.n_max = n_max;
      cell.budget_m = budget;
      if (budget == 0) {
        result.grid.push_back(cell);  // nothing replaced, nothing saved
        continue;
      }
      MiningConfig cfg = mine_cfg;
      cfg.budget_m = budget;
      try {
        const MedTpeVocabulary v = dependency_aware_replacement(
            base, table, freqs, result.corpus_digest, cfg);
        const TpeEncoder encoder(v);
        std::uint64_t medtpe_total = 0;
        for (const auto& stream : base_streams) {
          medtpe_total += encoder.encode_ids(stream).size();
        }
        if (base_total > 0) {
          cell.cr = 1.0 - static_cast<double>(medtpe_total) /
                              static_cast<double>(base_total);
        }
      } catch (const capacity_error&) {
        cell.feasible = false;
      }
      result.grid.push_back(cell);
    }
  }
  return result;
}

// Ranked (surface, count) list of the TPE tokens the encoder actually emits
// over the corpus: count descending, then surface ascending.
inline std::vector<std::pair<std::string, std::uint64_t>> token_stats(
    const MedTpeVocabulary& v, const std::vector<std::string>& corpus,
    std::size_t top_k, unsigned threads = 1) {
  if (top_k < 1) throw config_error("top_k must be at least 1");

  std::vector<std::uint64_t> counts(v.vocab().size(), 0);
  const TpeEncoder encoder(v);
  threads = resolve_threads(threads);
  if (threads <= 1 || corpus.size() <= 1) {
    WordCache cache;
    for (const std::string& doc : corpus) {
      for (const token_id id : encoder.encode(doc, cache).ids) {
        if (v.is_tpe_id(id)) ++counts[id];
      }
    }
  } else {
    const std::size_t chunks = std::min<std::size_t>(threads, corpus.size());
    std::vector<std::vector<std::uint64_t>> partial(
        chunks, std::vector<std::uint64_t>(v.vocab().size(), 0));
    parallel_chunks(corpus.size(), threads,
                    [&](std::size_t c, std::size_t begin, std::size_t end) {
                      WordCache cache;
                      for (std::size_t d = begin; d < end; ++d) {
                        for (const token_id id :
                             encoder.encode(corpus[d], cache).ids) {
                          if (v.is_tpe_id(id)) ++partial[c][id];
                        }
                      }
                    });
    for (const auto& part : partial) {
      for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += part[i];
    }
  }

  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (token_id id = 0; id < counts.size(); ++id) {
    if (v.is_tpe_id(id) && counts[id] > 0) {
      ranked.emplace_back(v.vocab().token_of(id), counts[id]);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

// Encode throughput at growing input sizes, tiling the sample text as
// needed. One warm-up pass per size, then the median wall time of `repeats`
// timed passes.
inline std::vector<BenchRow> bench(const MedTpeVocabulary& v,
                                   const std::string& sample_text,
                                   const std::vector<std::uint64_t>& sizes,
                                   unsigned repeats = 3) {
  if (sample_text.empty()) throw config_error("bench needs non-empty sample text");
  if (sizes.empty()) throw config_error("bench needs at least one size");
  if (repeats < 1) throw config_error("bench needs at least one repeat");

  const std::uint64_t max_size =
      *std::max_element(sizes.begin(), sizes.end());
  std::string tiled;
  tiled.reserve(max_size + sample_text.size());
  while (tiled.size() < max_size) tiled += sample_text;

  const TpeEncoder encoder(v);
  std::vector<BenchRow> rows;
  rows.reserve(sizes.size());
  for (const std::uint64_t n : sizes) {
    const std::string_view slice(tiled.data(), n);
    BenchRow row;
    row.n_bytes = n;
    row.tokens = encoder.encode(slice).token_len;  // warm-up
    std::vector<double> times;
    times.reserve(repeats);
    for (unsigned r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const EncodedSequence seq = encoder.encode(slice);
      times.push_back(detail::elapsed_seconds(start));
      row.tokens = seq.token_len;
    }
    std::sort(times.begin(), times.end());
    row.seconds = times[times.size() / 2];
    row.tokens_per_sec =
        row.seconds > 0.0 ? static_cast<double>(row.tokens) / row.seconds : 0.0;
    rows.push_back(row);
  }
  return rows;
}

// --- serialization -------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Timing is deliberately left out: reports must be byte-identical across
// runs on identical inputs, and wall time is not. The CLI prints timing on
// stderr instead.
inline ordered_json report_to_json(const CompressionReport& r,
                                   bool include_per_doc = true) {
  ordered_json j = ordered_json::object();
  j["docs"] = r.docs;
  j["base_tokens"] = r.base_tokens;
  j["medtpe_tokens"] = r.medtpe_tokens;
  j["cr"] = r.cr;
  if (include_per_doc) {
    ordered_json per_doc = ordered_json::array();
    for (const DocLengths& dl : r.per_doc) {
      per_doc.push_back(ordered_json::array({dl.base_len, dl.medtpe_len}));
    }
    j["per_doc"] = std::move(per_doc);
  }
  return j;
}

inline ordered_json sweep_to_json(const SweepResult& s) {
  ordered_json j = ordered_json::object();
  j["corpus_digest"] = s.corpus_digest;
  ordered_json grid = ordered_json::array();
  for (const SweepCell& cell : s.grid) {
    ordered_json row = ordered_json::object();
    row["n_max"] = cell.n_max;
    row["budget_m"] = cell.budget_m;
    row["feasible"] = cell.feasible;
    if (cell.feasible) {
      row["cr"] = cell.cr;
    } else {
      row["cr"] = nullptr;
    }
    grid.push_back(std::move(row));
  }
  j["grid"] = std::move(grid);
  return j;
}

inline std::string sweep_to_tsv(const SweepResult& s) {
  std::string out = "n_max\tbudget_m\tcr\n";
  for (const SweepCell& cell : s.grid) {
    out += std::to_string(cell.n_max);
    out += '\t';
    out += std::to_string(cell.budget_m);
    out += '\t';
    out += cell.feasible ? format_double(cell.cr) : std::string("NA");
    out += '\n';
  }
  return out;
}

inline ordered_json stats_to_json(
    const std::vector<std::pair<std::string, std::uint64_t>>& stats) {
  ordered_json arr = ordered_json::array();
  for (const auto& [surface, count] : stats) {
    ordered_json row = ordered_json::object();
    row["token"] = escape_token(surface);
    row["count"] = count;
    arr.push_back(std::move(row));
  }
  return arr;
}

inline ordered_json bench_to_json(const std::vector<BenchRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const BenchRow& row : rows) {
    ordered_json r = ordered_json::object();
    r["bytes"] = row.n_bytes;
    r["tokens"] = row.tokens;
    r["seconds"] = row.seconds;
    r["tokens_per_sec"] = row.tokens_per_sec;
    arr.push_back(std::move(r));
  }
  return arr;
}

}  // namespace medtpe
