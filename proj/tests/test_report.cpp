#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "medtpe/report.hpp"
#include "support/test_util.hpp"

using namespace medtpe;
using testutil::word_chain_tokenizer;

namespace {

TpeCandidate cand(std::vector<std::string> constituents, std::uint64_t freq) {
  TpeCandidate c;
  c.constituents = std::move(constituents);
  for (const auto& part : c.constituents) c.surface += part;
  c.freq = freq;
  c.score = freq * c.constituents.size();
  return c;
}

// One document repeating "heartrate" k times: the base layer always yields
// [heart, rate] per repeat, the composite layer one token per repeat, so
// the ratio is exactly one half.
struct BigramFixture {
  explicit BigramFixture(std::size_t k) {
    base = word_chain_tokenizer({"heart", "rate", "xyzq"});
    std::string doc;
    for (std::size_t i = 0; i < k; ++i) doc += "heartrate";
    corpus = {doc};
    MiningConfig cfg;
    cfg.n_max = 2;
    cfg.budget_m = 1;
    cfg.min_freq = 2;
    const CandidateTable table = count_ngrams(base, corpus, cfg);
    v.emplace(dependency_aware_replacement(base, table, corpus, cfg));
  }

  BaseTokenizer base;
  std::vector<std::string> corpus;
  std::optional<MedTpeVocabulary> v;
};

struct PhraseFixture {
  PhraseFixture() {
    base = word_chain_tokenizer({"heart", " rate", "xyzq"});
    corpus = {
        "heart rate heart rate",
        "heart rate heart rate",
        "heart rate heart rate",
    };
    MiningConfig cfg;
    cfg.n_max = 2;
    cfg.budget_m = 3;
    cfg.min_freq = 2;
    const CandidateTable table = count_ngrams(base, corpus, cfg);
    v.emplace(dependency_aware_replacement(base, table, corpus, cfg));
  }

  BaseTokenizer base;
  std::vector<std::string> corpus;
  std::optional<MedTpeVocabulary> v;
};

}  // namespace

TEST_CASE("a pure repeated bigram halves the token count") {
  const BigramFixture fx(10);
  const CompressionReport r = compression_report(*fx.v, fx.corpus);
  CHECK(r.docs == 1);
  CHECK(r.base_tokens == 20);
  CHECK(r.medtpe_tokens == 10);
  CHECK(r.cr == 0.5);
  REQUIRE(r.per_doc.size() == 1);
  CHECK(r.per_doc[0].base_len == 20);
  CHECK(r.per_doc[0].medtpe_len == 10);
  CHECK(r.elapsed_encode_seconds >= 0.0);
}

TEST_CASE("the headline ratio always rederives from the totals") {
  const PhraseFixture fx;
  for (const unsigned threads : {1u, 3u}) {
    const CompressionReport r = compression_report(*fx.v, fx.corpus, threads);
    std::uint64_t base_sum = 0;
    std::uint64_t medtpe_sum = 0;
    for (const DocLengths& dl : r.per_doc) {
      base_sum += dl.base_len;
      medtpe_sum += dl.medtpe_len;
    }
    CHECK(base_sum == r.base_tokens);
    CHECK(medtpe_sum == r.medtpe_tokens);
    CHECK(std::abs(r.cr - (1.0 - static_cast<double>(r.medtpe_tokens) /
                                     static_cast<double>(r.base_tokens))) <
          1e-12);
    CHECK(r.docs == fx.corpus.size());
  }
  // An empty corpus reports zero everywhere rather than dividing by zero.
  const CompressionReport empty = compression_report(*fx.v, {});
  CHECK(empty.docs == 0);
  CHECK(empty.cr == 0.0);
}

TEST_CASE("sweep cells rerun the full pipeline faithfully") {
  const PhraseFixture fx;
  const std::vector<unsigned> n_list = {2, 3};
  const std::vector<std::uint64_t> budgets = {0, 1, 2, 3, 50};
  const SweepResult sweep =
      budget_sweep(fx.base, fx.corpus, n_list, budgets, 2);

  REQUIRE(sweep.grid.size() == n_list.size() * budgets.size());
  CHECK(sweep.corpus_digest == corpus_digest(fx.corpus));

  for (const SweepCell& cell : sweep.grid) {
    if (cell.budget_m == 0) {
      CHECK(cell.feasible);
      CHECK(cell.cr == 0.0);
      continue;
    }
    if (cell.budget_m == 50) {
      CHECK_FALSE(cell.feasible);  // only three fodder tokens exist
      continue;
    }
    REQUIRE(cell.feasible);
    // Standalone pipeline on the same settings must give the same ratio.
    MiningConfig cfg;
    cfg.n_max = cell.n_max;
    cfg.budget_m = cell.budget_m;
    cfg.min_freq = 2;
    const CandidateTable table = count_ngrams(fx.base, fx.corpus, cfg);
    const MedTpeVocabulary v =
        dependency_aware_replacement(fx.base, table, fx.corpus, cfg);
    const CompressionReport r = compression_report(v, fx.corpus);
    CHECK(cell.cr == r.cr);
  }

  CHECK_THROWS_AS(budget_sweep(fx.base, fx.corpus, {}, budgets), config_error);
  CHECK_THROWS_AS(budget_sweep(fx.base, fx.corpus, n_list, {}), config_error);
}

TEST_CASE("compression never degrades as the budget grows") {
  const PhraseFixture fx;
  const SweepResult sweep =
      budget_sweep(fx.base, fx.corpus, {2}, {0, 1, 2, 3}, 2);
  REQUIRE(sweep.grid.size() == 4);
  for (std::size_t i = 1; i < sweep.grid.size(); ++i) {
    REQUIRE(sweep.grid[i].feasible);
    CHECK(sweep.grid[i].cr >= sweep.grid[i - 1].cr);
  }
  CHECK(sweep.grid.back().cr > 0.0);
}

TEST_CASE("emitted-token stats follow the exact savings ledger") {
  const PhraseFixture fx;
  const auto stats = token_stats(*fx.v, fx.corpus, 10);

  // Streams are [heart][ rate][ ][heart][ rate]: the greedy pass emits
  // "heart rate", then " heart", then a bare " rate", per document.
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].first == " heart");
  CHECK(stats[0].second == 3);
  CHECK(stats[1].first == "heart rate");
  CHECK(stats[1].second == 3);

  // Savings bookkeeping: sum of count x (constituents - 1) equals the
  // difference between post-fallback and final stream lengths.
  const TpeEncoder enc(*fx.v);
  std::uint64_t expanded = 0;
  std::uint64_t final_len = 0;
  for (const auto& doc : fx.corpus) {
    const auto base_ids = fx.base.encode(doc);
    expanded += enc.fallback_expand(base_ids).size();
    final_len += enc.encode_ids(base_ids).size();
  }
  std::uint64_t ledger = 0;
  for (const auto& [surface, count] : stats) {
    std::size_t n_t = 0;
    for (std::size_t k = 0; k < fx.v->replacement_count(); ++k) {
      if (fx.v->insertion_surfaces()[k] == surface) {
        n_t = fx.v->insertion_constituents(k).size();
      }
    }
    REQUIRE(n_t >= 2);
    ledger += count * (n_t - 1);
  }
  CHECK(ledger == expanded - final_len);
}

TEST_CASE("stat ordering, truncation, and threading") {
  const BigramFixture fx(6);
  const auto stats = token_stats(*fx.v, fx.corpus, 5);
  REQUIRE(stats.size() == 1);  // top_k above the distinct count shortens
  CHECK(stats[0].first == "heartrate");
  CHECK(stats[0].second == 6);

  const auto one = token_stats(*fx.v, fx.corpus, 1);
  CHECK(one == stats);
  CHECK(token_stats(*fx.v, fx.corpus, 5, 3) == stats);
  CHECK_THROWS_AS(token_stats(*fx.v, fx.corpus, 0), config_error);

  // Never-emitted composites stay out of the list entirely.
  const auto none = token_stats(*fx.v, {"zzz"}, 5);
  CHECK(none.empty());
}

TEST_CASE("throughput rows cover each requested size") {
  const BigramFixture fx(4);
  const auto rows = bench(*fx.v, "heartrate heartrate ", {0, 500, 1000}, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n_bytes == 0);
  CHECK(rows[0].tokens == 0);
  CHECK(rows[1].n_bytes == 500);
  CHECK(rows[1].tokens > 0);
  CHECK(rows[2].tokens > rows[1].tokens);
  for (const auto& row : rows) {
    CHECK(row.seconds >= 0.0);
    CHECK(row.tokens_per_sec >= 0.0);
  }

  CHECK_THROWS_AS(bench(*fx.v, "", {100}), config_error);
  CHECK_THROWS_AS(bench(*fx.v, "x", {}), config_error);
  CHECK_THROWS_AS(bench(*fx.v, "x", {100}, 0), config_error);
}

TEST_CASE("report serialization is stable and complete") {
  const BigramFixture fx(10);
  const CompressionReport r1 = compression_report(*fx.v, fx.corpus);
  const CompressionReport r2 = compression_report(*fx.v, fx.corpus);

  // Wall time differs between runs; the serialized report must not.
  const std::string a = report_to_json(r1).dump(2);
  const std::string b = report_to_json(r2).dump(2);
  CHECK(a == b);

  const ordered_json j = report_to_json(r1);
  CHECK(j["docs"] == 1);
  CHECK(j["base_tokens"] == 20);
  CHECK(j["medtpe_tokens"] == 10);
  CHECK(j["cr"] == 0.5);
  REQUIRE(j.contains("per_doc"));
  CHECK(j["per_doc"].size() == 1);
  CHECK(j["per_doc"][0][0] == 20);
  CHECK(j["per_doc"][0][1] == 10);

  const ordered_json slim = report_to_json(r1, false);
  CHECK_FALSE(slim.contains("per_doc"));
}

TEST_CASE("sweep serialization marks infeasible cells") {
  SweepResult s;
  s.corpus_digest = "deadbeefdeadbeef";
  SweepCell good;
  good.n_max = 2;
  good.budget_m = 10;
  good.cr = 0.25;
  SweepCell bad;
  bad.n_max = 3;
  bad.budget_m = 99;
  bad.feasible = false;
  s.grid = {good, bad};

  const ordered_json j = sweep_to_json(s);
  CHECK(j["corpus_digest"] == "deadbeefdeadbeef");
  CHECK(j["grid"][0]["cr"] == 0.25);
  CHECK(j["grid"][1]["cr"].is_null());
  CHECK(j["grid"][1]["feasible"] == false);

  const std::string tsv = sweep_to_tsv(s);
  CHECK(tsv == "n_max\tbudget_m\tcr\n2\t10\t0.25\n3\t99\tNA\n");
}

TEST_CASE("stat and bench serialization escape and label fields") {
  const std::vector<std::pair<std::string, std::uint64_t>> stats = {
      {" heart rate", 7}, {"a\nb", 2}};
  const ordered_json j = stats_to_json(stats);
  CHECK(j[0]["token"] == " heart rate");
  CHECK(j[0]["count"] == 7);
  CHECK(j[1]["token"] == "a<0x0A>b");

  BenchRow row;
  row.n_bytes = 1024;
  row.tokens = 300;
  row.seconds = 0.5;
  row.tokens_per_sec = 600.0;
  const ordered_json bj = bench_to_json({row});
  CHECK(bj[0]["bytes"] == 1024);
  CHECK(bj[0]["tokens"] == 300);
  CHECK(bj[0]["seconds"] == 0.5);
  CHECK(bj[0]["tokens_per_sec"] == 600.0);
}

TEST_CASE("shortest-form double formatting") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
}
