#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "medtpe/surgery.hpp"
#include "support/test_util.hpp"

using namespace medtpe;
using testutil::make_tokenizer;
using testutil::spirometry_tokenizer;
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

// The fixture behind most pipeline tests: two phrase words plus an unused
// word whose intermediate tokens are pure eviction fodder.
struct PhraseFixture {
  BaseTokenizer base = word_chain_tokenizer({"heart", " rate", "xyzq"});
  std::vector<std::string> corpus = {
      "heart rate heart rate",
      "heart rate heart rate",
      "heart rate heart rate",
  };
};

}  // namespace

TEST_CASE("merge path folds constituents left to right") {
  using Pairs = std::vector<std::pair<std::string, std::string>>;
  CHECK(build_merge_path(cand({"a", "b"}, 1)).pairs == Pairs{{"a", "b"}});
  CHECK(build_merge_path(cand({"a", "b", "c", "d"}, 1)).pairs ==
        Pairs{{"a", "b"}, {"ab", "c"}, {"abc", "d"}});
  TpeCandidate too_short;
  too_short.constituents = {"a"};
  CHECK_THROWS_AS(build_merge_path(too_short), config_error);
}

TEST_CASE("merge table concatenates paths and keeps first occurrences") {
  const std::vector<TpeCandidate> insertion = {
      cand({"A", "B"}, 9),
      cand({"A", "B", "C"}, 5),
  };
  const TpeMergeTable table = build_tpe_merge_table(insertion);
  using Pairs = std::vector<std::pair<std::string, std::string>>;
  CHECK(table.pairs == Pairs{{"A", "B"}, {"AB", "C"}});
  CHECK(table.origin.at({"A", "B"}) == 0);
  CHECK(table.origin.at({"AB", "C"}) == 1);
}

TEST_CASE("dependent set closes constituents down to byte leaves") {
  const BaseTokenizer base = spirometry_tokenizer();
  const auto deps =
      dependent_set({cand({"Spi", "rom", "etry"}, 1)}, base);
  const std::unordered_set<std::string> expected = {
      "Spi", "rom", "etry", "Sp", "S", "p", "i",
      "ro",  "r",   "o",    "m",  "et", "e", "t", "etr", "y"};
  CHECK(deps == expected);
}

TEST_CASE("composite path prefixes that are real tokens join the set") {
  // Path of [a,b,c] is [(a,b),(ab,c)]; whether "ab" needs protection
  // depends on whether the base vocabulary owns that string.
  const BaseTokenizer with_ab = make_tokenizer({{"a", "b"}});
  const auto deps = dependent_set({cand({"a", "b", "c"}, 1)}, with_ab);
  CHECK(deps == std::unordered_set<std::string>{"a", "b", "ab", "c"});

  const BaseTokenizer without_ab = make_tokenizer({{"x", "y"}});
  const auto deps2 = dependent_set({cand({"a", "b", "c"}, 1)}, without_ab);
  CHECK(deps2 == std::unordered_set<std::string>{"a", "b", "c"});
}

TEST_CASE("dependent set rejects unknown constituents") {
  const BaseTokenizer base = make_tokenizer({{"a", "b"}});
  CHECK_THROWS_AS(dependent_set({cand({"ab", "zz"}, 1)}, base),
                  integrity_error);
}

TEST_CASE("token frequencies count the encoded corpus") {
  const BaseTokenizer base = testutil::make_byte_tokenizer();
  const auto freqs = token_frequencies(base, {"aa"});
  CHECK(freqs.at("a") == 2);
  CHECK(freqs.at("b") == 0);
  CHECK(freqs.size() == base.vocab().size());

  const BaseTokenizer spiro = spirometry_tokenizer();
  const std::vector<std::string> corpus = {"Spirometry", "rom rom"};
  const auto f1 = token_frequencies(spiro, corpus, 1);
  CHECK(f1.at("Spi") == 1);
  // "rom rom" yields [rom][space, rom]: once in doc 1, twice in doc 2.
  CHECK(f1.at("rom") == 3);
  CHECK(f1.at("ro") == 0);
  CHECK(token_frequencies(spiro, corpus, 3) == f1);
}

TEST_CASE("eviction picks the rarest, longest-first on ties") {
  const BaseTokenizer base =
      make_tokenizer({{"a", "b"}, {"ab", "c"}, {"z", "z"}});
  // Products: "ab", "abc", "zz".
  std::unordered_map<std::string, std::uint64_t> freqs;

  SECTION("all zero: longer surfaces go first, then lexicographic") {
    const auto picked = select_eviction(base, {}, freqs, 3);
    CHECK(picked == std::vector<std::string>{"abc", "ab", "zz"});
  }

  SECTION("frequency dominates length") {
    freqs["abc"] = 9;
    freqs["zz"] = 4;
    freqs["ab"] = 0;
    const auto picked = select_eviction(base, {}, freqs, 3);
    CHECK(picked == std::vector<std::string>{"ab", "zz", "abc"});
  }

  SECTION("protected tokens are skipped") {
    const auto picked = select_eviction(base, {"abc"}, freqs, 2);
    CHECK(picked == std::vector<std::string>{"ab", "zz"});
  }

  SECTION("overdrawn budget reports the feasible maximum") {
    try {
      select_eviction(base, {}, freqs, 4);
      FAIL("expected capacity_error");
    } catch (const capacity_error& e) {
      CHECK(e.max_feasible() == 3);
    }
  }
}

TEST_CASE("evicted tokens decompose into surviving parts") {
  const BaseTokenizer base = make_tokenizer({{"a", "t"}, {"C", "at"}});
  CHECK(decompose_evicted(base, "Cat", {"Cat"}) ==
        std::vector<std::string>{"C", "at"});
  // When a part is itself evicted, expansion continues to survivors.
  CHECK(decompose_evicted(base, "Cat", {"Cat", "at"}) ==
        std::vector<std::string>{"C", "a", "t"});
}

TEST_CASE("replacement swaps exactly the budgeted ids in place") {
  PhraseFixture fx;
  MiningConfig cfg;
  cfg.n_max = 2;
  cfg.min_freq = 2;
  cfg.budget_m = 1;
  const CandidateTable table = count_ngrams(fx.base, fx.corpus, cfg);
  const MedTpeVocabulary v =
      dependency_aware_replacement(fx.base, table, fx.corpus, cfg);

  CHECK(v.vocab().size() == fx.base.vocab().size());
  CHECK(v.replacement_count() == 1);
  CHECK(v.insertion_surfaces() == std::vector<std::string>{"heart rate"});
  CHECK(v.insertion_constituents(0) ==
        std::vector<std::string>{"heart", " rate"});
  // The only unprotected tokens are the unused xy/xyz/xyzq chain; ties at
  // frequency zero evict the longest.
  CHECK(v.eviction() == std::vector<std::string>{"xyzq"});
  CHECK(v.decomposition_of("xyzq") == std::vector<std::string>{"xyz", "q"});

  const token_id reused = fx.base.vocab().id_of("xyzq");
  CHECK(v.replaced_id(0) == reused);
  CHECK(v.vocab().token_of(reused) == "heart rate");
  CHECK(v.vocab().id_of("heart rate") == reused);
  CHECK_FALSE(v.vocab().contains("xyzq"));
  CHECK(v.is_evicted("xyzq"));
  CHECK(v.is_tpe_id(reused));
  CHECK_FALSE(v.is_tpe_id(fx.base.vocab().id_of("heart")));

  using Pairs = std::vector<std::pair<std::string, std::string>>;
  CHECK(v.tpe_merges().pairs == Pairs{{"heart", " rate"}});
  CHECK(v.n_max() == 2);
  CHECK(v.budget_m() == 1);
  CHECK(v.corpus_digest() == corpus_digest(fx.corpus));
}

TEST_CASE("eviction never touches the dependent set") {
  PhraseFixture fx;
  MiningConfig cfg;
  cfg.min_freq = 2;
  cfg.budget_m = 3;  // all three fodder tokens
  const CandidateTable table = count_ngrams(fx.base, fx.corpus, cfg);
  const MedTpeVocabulary v =
      dependency_aware_replacement(fx.base, table, fx.corpus, cfg);

  std::vector<TpeCandidate> insertion;
  for (std::size_t k = 0; k < v.replacement_count(); ++k) {
    insertion.push_back(cand(v.insertion_constituents(k), 1));
  }
  const auto deps = dependent_set(insertion, fx.base);
  for (const auto& evicted : v.eviction()) {
    CHECK(deps.count(evicted) == 0);
  }
  // A budget beyond the unprotected pool is refused with the pool size.
  cfg.budget_m = 4;
  try {
    dependency_aware_replacement(fx.base, table, fx.corpus, cfg);
    FAIL("expected capacity_error");
  } catch (const capacity_error& e) {
    CHECK(e.max_feasible() == 3);
  }
}

TEST_CASE("candidates colliding with existing tokens are skipped") {
  const BaseTokenizer base = word_chain_tokenizer({"ab", "xyzq"});
  CandidateTable table;
  table.rows = {cand({"a", "b"}, 10), cand({"b", "a"}, 5)};
  MiningConfig cfg;
  cfg.budget_m = 1;
  const MedTpeVocabulary v = dependency_aware_replacement(
      base, table, std::vector<std::string>{"ba ba"}, cfg);
  // "ab" is already a base token, so the weaker "ba" wins the only slot.
  CHECK(v.insertion_surfaces() == std::vector<std::string>{"ba"});

  cfg.budget_m = 2;
  try {
    dependency_aware_replacement(base, table, std::vector<std::string>{"ba"},
                                 cfg);
    FAIL("expected capacity_error");
  } catch (const capacity_error& e) {
    CHECK(e.max_feasible() == 1);
  }
}

TEST_CASE("constructor enforces the replacement invariants") {
  const BaseTokenizer base = make_tokenizer({{"x", "y"}});
  const TpeMergeTable table = build_tpe_merge_table({cand({"a", "b"}, 1)});
  const std::unordered_map<std::string, std::vector<std::string>> decomp = {
      {"xy", {"x", "y"}}};

  // The valid baseline.
  CHECK_NOTHROW(MedTpeVocabulary(base, table, {{"a", "b"}}, {"xy"}, decomp, 2,
                                 1, "d"));

  // Insertion/eviction size mismatch.
  CHECK_THROWS_AS(
      MedTpeVocabulary(base, table, {{"a", "b"}}, {}, {}, 2, 1, "d"),
      integrity_error);
  // Byte tokens cannot leave.
  CHECK_THROWS_AS(MedTpeVocabulary(base, table, {{"a", "b"}}, {"x"},
                                   {{"x", {"x"}}}, 2, 1, "d"),
                  integrity_error);
  // Unknown eviction target.
  CHECK_THROWS_AS(MedTpeVocabulary(base, table, {{"a", "b"}}, {"zz"},
                                   {{"zz", {"z", "z"}}}, 2, 1, "d"),
                  integrity_error);
  // Decomposition must concatenate to the evicted string.
  CHECK_THROWS_AS(MedTpeVocabulary(base, table, {{"a", "b"}}, {"xy"},
                                   {{"xy", {"y", "x"}}}, 2, 1, "d"),
                  integrity_error);
  // Decomposition through an evicted part is no longer grounded.
  CHECK_THROWS_AS(MedTpeVocabulary(base, table, {{"a", "b"}}, {"xy"},
                                   {{"xy", {"xy"}}}, 2, 1, "d"),
                  integrity_error);
  // The merge table must produce every insertion surface.
  CHECK_THROWS_AS(MedTpeVocabulary(base, TpeMergeTable{}, {{"a", "b"}}, {"xy"},
                                   decomp, 2, 1, "d"),
                  integrity_error);
  // Stored n_max must stay in range.
  CHECK_THROWS_AS(
      MedTpeVocabulary(base, table, {{"a", "b"}}, {"xy"}, decomp, 1, 1, "d"),
      integrity_error);
}

TEST_CASE("specials never leave the vocabulary") {
  auto toks = testutil::byte_tokens();
  toks.push_back("xy");
  toks.push_back("<pad>");
  std::vector<MergeRule> merges(1);
  merges[0].left = "x";
  merges[0].right = "y";
  const BaseTokenizer base(Vocabulary(toks, {"<pad>"}), merges);
  const TpeMergeTable table = build_tpe_merge_table({cand({"a", "b"}, 1)});
  CHECK_THROWS_AS(MedTpeVocabulary(base, table, {{"a", "b"}}, {"<pad>"},
                                   {{"<pad>", {"<pad>"}}}, 2, 1, "d"),
                  integrity_error);
}

TEST_CASE("a merge table out of dependency order is rejected") {
  const BaseTokenizer base = make_tokenizer({{"x", "y"}});
  // (ab,c) before (a,b): the left side names a composite no earlier pair
  // built.
  TpeMergeTable bad;
  bad.pairs = {{"ab", "c"}, {"a", "b"}};
  bad.origin[{"ab", "c"}] = 0;
  bad.origin[{"a", "b"}] = 1;
  CHECK_THROWS_AS(MedTpeVocabulary(base, bad, {{"a", "b", "c"}}, {"xy"},
                                   {{"xy", {"x", "y"}}}, 2, 1, "d"),
                  integrity_error);
}

TEST_CASE("surgered vocabulary serializes and reloads byte-identically") {
  PhraseFixture fx;
  MiningConfig cfg;
  cfg.min_freq = 2;
  cfg.budget_m = 2;
  const CandidateTable table = count_ngrams(fx.base, fx.corpus, cfg);
  const MedTpeVocabulary v =
      dependency_aware_replacement(fx.base, table, fx.corpus, cfg);

  const std::string text = v.to_json_text();
  const MedTpeVocabulary back = MedTpeVocabulary::from_json_text(text);
  CHECK(back.to_json_text() == text);
  CHECK(back.base().to_json_text() == fx.base.to_json_text());
  CHECK(back.insertion_surfaces() == v.insertion_surfaces());
  CHECK(back.eviction() == v.eviction());
  for (std::size_t k = 0; k < v.replacement_count(); ++k) {
    CHECK(back.replaced_id(k) == v.replaced_id(k));
  }

  testutil::TempDir dir;
  v.save(dir.file("v.json"));
  CHECK(MedTpeVocabulary::load(dir.file("v.json")).to_json_text() == text);
}

TEST_CASE("tampered files are rejected on load") {
  PhraseFixture fx;
  MiningConfig cfg;
  cfg.min_freq = 2;
  cfg.budget_m = 1;
  const CandidateTable table = count_ngrams(fx.base, fx.corpus, cfg);
  const MedTpeVocabulary v =
      dependency_aware_replacement(fx.base, table, fx.corpus, cfg);
  const std::string good = v.to_json_text();

  // Swap the stored layered merge for a different pair.
  std::string bad = good;
  const auto pos = bad.find("\"heart\",");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 8, "\"hear\",");
  CHECK_THROWS_AS(MedTpeVocabulary::from_json_text(bad), medtpe::error);

  // Remove a required section.
  std::string missing = good;
  const auto ev = missing.find("\"eviction\"");
  REQUIRE(ev != std::string::npos);
  missing.replace(ev, 10, "\"evictionX\"");
  CHECK_THROWS_AS(MedTpeVocabulary::from_json_text(missing), format_error);

  CHECK_THROWS_AS(MedTpeVocabulary::from_json_text("{]"), format_error);
}

TEST_CASE("replacement is deterministic") {
  PhraseFixture fx;
  MiningConfig cfg;
  cfg.min_freq = 2;
  cfg.budget_m = 2;
  const CandidateTable t1 = count_ngrams(fx.base, fx.corpus, cfg, 1);
  const CandidateTable t2 = count_ngrams(fx.base, fx.corpus, cfg, 3);
  const std::string a =
      dependency_aware_replacement(fx.base, t1, fx.corpus, cfg).to_json_text();
  const std::string b =
      dependency_aware_replacement(fx.base, t2, fx.corpus, cfg, 3).to_json_text();
  CHECK(a == b);
}

TEST_CASE("randomized pipelines keep the size and dependency laws") {
  for (const std::uint64_t seed : {11ull, 22ull, 33ull, 44ull}) {
    const testutil::ToyPipeline toy = testutil::make_toy_pipeline(seed);
    CHECK(toy.v.vocab().size() == toy.base.vocab().size());
    CHECK(toy.v.replacement_count() == toy.cfg.budget_m);
    CHECK(toy.v.eviction().size() == toy.v.replacement_count());

    std::vector<TpeCandidate> insertion;
    for (std::size_t k = 0; k < toy.v.replacement_count(); ++k) {
      insertion.push_back(cand(toy.v.insertion_constituents(k), 1));
    }
    const auto deps = dependent_set(insertion, toy.base);
    for (const auto& evicted : toy.v.eviction()) {
      CHECK(deps.count(evicted) == 0);
      CHECK_FALSE(toy.v.vocab().contains(evicted));
    }
    for (const auto& surface : toy.v.insertion_surfaces()) {
      CHECK(toy.v.vocab().contains(surface));
      CHECK_FALSE(toy.base.vocab().contains(surface));
    }
  }
}
