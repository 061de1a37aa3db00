// medtpe: adapt a byte-level BPE tokenizer to a target corpus by replacing
// low-utility vocabulary entries with frequent multi-token composites, then
// encode/decode/report with the extended tokenizer.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/codec.hpp"
#include "medtpe/corpus.hpp"
#include "medtpe/embeddings.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/hf_import.hpp"
#include "medtpe/mining.hpp"
#include "medtpe/report.hpp"
#include "medtpe/surgery.hpp"
#include "medtpe/synth_corpus.hpp"
#include "medtpe/text_util.hpp"
#include "medtpe/trainer.hpp"
#include "medtpe/vocabulary.hpp"

namespace {

using namespace medtpe;

constexpr const char* kVersion = "0.1.0";

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    if (std::cin.bad()) throw io_error("failed reading stdin");
    return buf.str();
  }
  return detail::read_file(path);
}

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout.write(data.data(),
                    static_cast<std::streamsize>(data.size()));
    std::cout.flush();
    if (!std::cout.good()) throw io_error("failed writing stdout");
    return;
  }
  detail::write_file(path, data);
}

// Tokenizer files come in two layers: a plain base tokenizer, or a surgered
// one carrying the composite-token fields. Commands that encode accept
// either; a plain file is wrapped as an identity extension.
MedTpeVocabulary load_any_tokenizer(const std::string& path) {
  const std::string text = detail::read_file(path);
  const ordered_json j = detail::parse_json_checked(text, path);
  if (j.is_object() && j.contains("tpe_merges")) {
    return MedTpeVocabulary::from_json_text(text, path);
  }
  return MedTpeVocabulary(BaseTokenizer::from_json_text(text, path), {}, {}, {},
                          {}, 2, 0, "");
}

std::vector<token_id> parse_ids_text(const std::string& text) {
  std::vector<token_id> ids;
  std::istringstream in(text);
  std::uint64_t v = 0;
  while (in >> v) {
    if (v > std::numeric_limits<token_id>::max()) {
      throw format_error("token id " + std::to_string(v) + " exceeds 32 bits");
    }
    ids.push_back(static_cast<token_id>(v));
  }
  if (!in.eof()) {
    std::string bad;
    in.clear();
    in >> bad;
    throw format_error("expected a whitespace-separated integer, found \"" +
                       bad + "\"");
  }
  return ids;
}

std::string ids_to_text(const std::vector<token_id>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  out += '\n';
  return out;
}

std::string frame_to_string(const std::vector<token_id>& ids) {
  std::ostringstream out(std::ios::binary);
  write_id_frame(out, ids);
  return out.str();
}

struct CommonOpts {
  std::string tokenizer;
  std::string corpus;
  std::string format = "lines";
  std::string out;
  unsigned threads = 1;
};

std::vector<std::string> load_docs(const CommonOpts& o) {
  return load_corpus(o.corpus, parse_corpus_format(o.format));
}

void add_corpus_opts(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--corpus", o.corpus, "Corpus file")->required();
  cmd->add_option("--format", o.format,
                  "Corpus format: lines or json-lines (alias jsonl)")
      ->default_val("lines");
}

int run(int argc, char** argv) {
  CLI::App app{"Corpus-adaptive tokenizer extension"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // --- gen-corpus ---------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-corpus", "Generate the deterministic synthetic evaluation corpus");
  SynthConfig synth_cfg;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output path (- for stdout)")->required();
  gen->add_option("--seed", synth_cfg.seed, "Generator seed")->default_val(42);
  gen->add_option("--bytes", synth_cfg.target_bytes, "Approximate corpus size")
      ->default_val(10'000'000);
  gen->add_option("--min-terms", synth_cfg.min_terms, "Min terms per record")
      ->default_val(5);
  gen->add_option("--max-terms", synth_cfg.max_terms, "Max terms per record")
      ->default_val(10);
  gen->callback([&] {
    const std::vector<std::string> docs = generate_corpus(synth_cfg);
    std::string out;
    for (const std::string& d : docs) {
      out += d;
      out += '\n';
    }
    write_output(gen_out, out);
    std::fprintf(stderr, "wrote %zu documents (%zu bytes)\n", docs.size(),
                 out.size());
  });

  // --- train-base ---------------------------------------------------------
  auto* train = app.add_subcommand(
      "train-base", "Train a byte-level BPE tokenizer from scratch");
  CommonOpts train_o;
  TrainerConfig train_cfg;
  add_corpus_opts(train, train_o);
  train->add_option("--out", train_o.out, "Tokenizer output path")->required();
  train->add_option("--vocab-size", train_cfg.vocab_size, "Target vocabulary size")
      ->default_val(16384);
  train->add_option("--min-pair-count", train_cfg.min_pair_count,
                    "Minimum pair count to merge")
      ->default_val(2);
  train->add_option("--special", train_cfg.specials,
                    "Special token (repeatable)");
  train->callback([&] {
    BpeTrainer trainer(train_cfg);
    for_each_document(train_o.corpus, parse_corpus_format(train_o.format),
                      [&](const std::string& doc) { trainer.add_text(doc); });
    const BaseTokenizer tok = trainer.train();
    tok.save(train_o.out);
    std::fprintf(stderr, "trained vocabulary of %zu tokens from %zu words\n",
                 static_cast<std::size_t>(tok.vocab().size()),
                 trainer.distinct_words());
  });

  // --- mine ---------------------------------------------------------------
  auto* mine = app.add_subcommand(
      "mine", "Count frequent token N-grams and export the candidate table");
  CommonOpts mine_o;
  MiningConfig mine_cfg;
  std::uint64_t mine_top = 0;
  mine->add_option("--tokenizer", mine_o.tokenizer, "Base tokenizer file")
      ->required();
  add_corpus_opts(mine, mine_o);
  mine->add_option("--out", mine_o.out, "Candidate TSV path (- for stdout)");
  mine->add_option("--n-max", mine_cfg.n_max, "Longest N-gram to count")
      ->default_val(2);
  mine->add_option("--min-freq", mine_cfg.min_freq, "Minimum N-gram frequency")
      ->default_val(2);
  mine->add_option("--top", mine_top, "Keep only the best K rows (0 = all)")
      ->default_val(0);
  mine->add_option("--threads", mine_o.threads, "Worker threads (0 = all cores)")
      ->default_val(1);
  mine->callback([&] {
    const BaseTokenizer tok = BaseTokenizer::load(mine_o.tokenizer);
    const std::vector<std::string> docs = load_docs(mine_o);
    CandidateTable table = count_ngrams(tok, docs, mine_cfg, mine_o.threads);
    if (mine_top > 0 && table.rows.size() > mine_top) {
      table.rows.resize(mine_top);
    }
    std::ostringstream out;
    write_candidates_tsv(table, out);
    write_output(mine_o.out, out.str());
    std::fprintf(stderr, "mined %zu candidates\n", table.rows.size());
  });

  // --- build --------------------------------------------------------------
  auto* build = app.add_subcommand(
      "build", "Run the full pipeline: mine, select, evict, assemble");
  CommonOpts build_o;
  MiningConfig build_cfg;
  build->add_option("--tokenizer", build_o.tokenizer, "Base tokenizer file")
      ->required();
  add_corpus_opts(build, build_o);
  build->add_option("--out", build_o.out, "Extended tokenizer output path")
      ->required();
  build->add_option("--n-max", build_cfg.n_max, "Longest composite in tokens")
      ->default_val(2);
  build->add_option("--budget", build_cfg.budget_m, "Tokens to replace")
      ->default_val(5000);
  build->add_option("--min-freq", build_cfg.min_freq, "Minimum N-gram frequency")
      ->default_val(2);
  build->add_option("--threads", build_o.threads, "Worker threads (0 = all cores)")
      ->default_val(1);
  build->callback([&] {
    const BaseTokenizer tok = BaseTokenizer::load(build_o.tokenizer);
    const std::vector<std::string> docs = load_docs(build_o);
    const CandidateTable table =
        count_ngrams(tok, docs, build_cfg, build_o.threads);
    const MedTpeVocabulary v = dependency_aware_replacement(
        tok, table, docs, build_cfg, build_o.threads);
    v.save(build_o.out);
    std::fprintf(stderr,
                 "replaced %zu of %zu tokens (corpus digest %s)\n",
                 v.replacement_count(),
                 static_cast<std::size_t>(v.vocab().size()),
                 v.corpus_digest().c_str());
  });

  // --- encode -------------------------------------------------------------
  auto* enc = app.add_subcommand("encode", "Encode text to token ids");
  std::string enc_tokenizer, enc_input, enc_out, enc_prompt_file;
  bool enc_binary = false;
  enc->add_option("--tokenizer", enc_tokenizer, "Tokenizer file (base or extended)")
      ->required();
  enc->add_option("--input", enc_input, "Input text file (- or omit for stdin)");
  enc->add_option("--out", enc_out, "Output path (- or omit for stdout)");
  enc->add_flag("--binary", enc_binary, "Emit the binary id frame instead of text");
  enc->add_option("--prompt-file", enc_prompt_file,
                  "Encode this file too and append its ids");
  enc->callback([&] {
    const MedTpeVocabulary v = load_any_tokenizer(enc_tokenizer);
    const TpeEncoder encoder(v);
    std::vector<token_id> ids = encoder.encode(read_input(enc_input)).ids;
    if (!enc_prompt_file.empty()) {
      const std::vector<token_id> prompt_ids =
          encoder.encode(detail::read_file(enc_prompt_file)).ids;
      ids.insert(ids.end(), prompt_ids.begin(), prompt_ids.end());
    }
    write_output(enc_out, enc_binary ? frame_to_string(ids) : ids_to_text(ids));
  });

  // --- decode -------------------------------------------------------------
  auto* dec = app.add_subcommand("decode", "Decode token ids back to text");
  std::string dec_tokenizer, dec_input, dec_out;
  bool dec_replace = false;
  dec->add_option("--tokenizer", dec_tokenizer, "Tokenizer file (base or extended)")
      ->required();
  dec->add_option("--input", dec_input,
                  "Id input: text integers or a binary frame (auto-detected)");
  dec->add_option("--out", dec_out, "Output path (- or omit for stdout)");
  dec->add_flag("--replace-invalid", dec_replace,
                "Replace invalid UTF-8 instead of failing");
  dec->callback([&] {
    const MedTpeVocabulary v = load_any_tokenizer(dec_tokenizer);
    const std::string raw = read_input(dec_input);
    std::vector<token_id> ids;
    if (raw.size() >= 4 && raw.compare(0, 4, "MTPE") == 0) {
      std::istringstream in(raw, std::ios::binary);
      ids = read_id_frame(in);
    } else {
      ids = parse_ids_text(raw);
    }
    write_output(dec_out,
                 medtpe_decode(v, ids,
                               dec_replace ? decode_mode::replace
                                           : decode_mode::strict));
  });

  // --- report -------------------------------------------------------------
  auto* rep = app.add_subcommand(
      "report", "Compression report: per-document lengths and overall ratio");
  CommonOpts rep_o;
  std::string rep_prompt_file;
  bool rep_include_prompt = false;
  bool rep_no_per_doc = false;
  rep->add_option("--tokenizer", rep_o.tokenizer, "Extended tokenizer file")
      ->required();
  add_corpus_opts(rep, rep_o);
  rep->add_option("--out", rep_o.out, "Report JSON path (- for stdout)");
  rep->add_option("--prompt-file", rep_prompt_file,
                  "Task prompt encoded alongside the corpus");
  rep->add_flag("--include-prompt", rep_include_prompt,
                "Count the prompt's tokens in the compression ratio");
  rep->add_flag("--no-per-doc", rep_no_per_doc, "Omit per-document lengths");
  rep->add_option("--threads", rep_o.threads, "Worker threads (0 = all cores)")
      ->default_val(1);
  rep->callback([&] {
    const MedTpeVocabulary v = load_any_tokenizer(rep_o.tokenizer);
    const std::vector<std::string> docs = load_docs(rep_o);
    const CompressionReport report =
        compression_report(v, docs, rep_o.threads);
    ordered_json j = report_to_json(report, !rep_no_per_doc);
    if (!rep_prompt_file.empty()) {
      const std::string prompt = detail::read_file(rep_prompt_file);
      const std::uint64_t prompt_base = v.base().encode(prompt).size();
      const std::uint64_t prompt_medtpe =
          TpeEncoder(v).encode(prompt).token_len;
      ordered_json pj = ordered_json::object();
      pj["base_tokens"] = prompt_base;
      pj["medtpe_tokens"] = prompt_medtpe;
      pj["included_in_cr"] = rep_include_prompt;
      j["prompt"] = std::move(pj);
      if (rep_include_prompt) {
        const std::uint64_t bt = report.base_tokens + prompt_base;
        const std::uint64_t mt = report.medtpe_tokens + prompt_medtpe;
        j["cr"] = bt > 0 ? 1.0 - static_cast<double>(mt) /
                                     static_cast<double>(bt)
                         : 0.0;
      }
    }
    write_output(rep_o.out, j.dump(2) + "\n");
    std::fprintf(stderr, "encoded %llu documents in %.3f s\n",
                 static_cast<unsigned long long>(report.docs),
                 report.elapsed_encode_seconds);
  });

  // --- sweep --------------------------------------------------------------
  auto* sweep = app.add_subcommand(
      "sweep", "Compression ratio over an N-gram length × budget grid");
  CommonOpts sweep_o;
  std::vector<unsigned> sweep_n_max = {2, 3, 4, 5};
  std::vector<std::uint64_t> sweep_budgets = {100, 500, 1000, 5000};
  std::uint64_t sweep_min_freq = 2;
  std::string sweep_tsv;
  sweep->add_option("--tokenizer", sweep_o.tokenizer, "Base tokenizer file")
      ->required();
  add_corpus_opts(sweep, sweep_o);
  sweep->add_option("--out", sweep_o.out, "Sweep JSON path (- for stdout)");
  sweep->add_option("--tsv", sweep_tsv, "Also write a TSV grid here");
  sweep->add_option("--n-max-list", sweep_n_max, "N-gram lengths to sweep")
      ->delimiter(',');
  sweep->add_option("--budget-list", sweep_budgets, "Budgets to sweep")
      ->delimiter(',');
  sweep->add_option("--min-freq", sweep_min_freq, "Minimum N-gram frequency")
      ->default_val(2);
  sweep->add_option("--threads", sweep_o.threads, "Worker threads (0 = all cores)")
      ->default_val(1);
  sweep->callback([&] {
    const BaseTokenizer tok = BaseTokenizer::load(sweep_o.tokenizer);
    const std::vector<std::string> docs = load_docs(sweep_o);
    const SweepResult result = budget_sweep(tok, docs, sweep_n_max,
                                            sweep_budgets, sweep_min_freq,
                                            sweep_o.threads);
    write_output(sweep_o.out, sweep_to_json(result).dump(2) + "\n");
    if (!sweep_tsv.empty()) write_output(sweep_tsv, sweep_to_tsv(result));
  });

  // --- stats --------------------------------------------------------------
  auto* stats = app.add_subcommand(
      "stats", "Most frequent composite tokens in the corpus encoding");
  CommonOpts stats_o;
  std::uint64_t stats_top_k = 10;
  stats->add_option("--tokenizer", stats_o.tokenizer, "Extended tokenizer file")
      ->required();
  add_corpus_opts(stats, stats_o);
  stats->add_option("--out", stats_o.out, "Stats JSON path (- for stdout)");
  stats->add_option("--top-k", stats_top_k, "Rows to report")->default_val(10);
  stats->add_option("--threads", stats_o.threads, "Worker threads (0 = all cores)")
      ->default_val(1);
  stats->callback([&] {
    const MedTpeVocabulary v = load_any_tokenizer(stats_o.tokenizer);
    const std::vector<std::string> docs = load_docs(stats_o);
    const auto ranked = token_stats(v, docs, stats_top_k, stats_o.threads);
    write_output(stats_o.out, stats_to_json(ranked).dump(2) + "\n");
  });

  // --- bench --------------------------------------------------------------
  auto* bn = app.add_subcommand("bench", "Encode throughput at growing sizes");
  std::string bn_tokenizer, bn_corpus, bn_out;
  std::string bn_format = "lines";
  std::vector<std::uint64_t> bn_sizes = {1u << 20, 2u << 20, 4u << 20, 8u << 20};
  unsigned bn_repeats = 5;
  bn->add_option("--tokenizer", bn_tokenizer, "Tokenizer file (base or extended)")
      ->required();
  bn->add_option("--corpus", bn_corpus,
                 "Sample text source (omit to use the synthetic corpus)");
  bn->add_option("--format", bn_format, "Corpus format: lines or json-lines")
      ->default_val("lines");
  bn->add_option("--out", bn_out, "Bench JSON path (- for stdout)");
  bn->add_option("--sizes", bn_sizes, "Input sizes in bytes")->delimiter(',');
  bn->add_option("--repeats", bn_repeats, "Timed passes per size")
      ->default_val(5);
  bn->callback([&] {
    const MedTpeVocabulary v = load_any_tokenizer(bn_tokenizer);
    std::string sample;
    if (bn_corpus.empty()) {
      SynthConfig cfg;
      cfg.target_bytes = 1u << 20;
      for (const std::string& d : generate_corpus(cfg)) {
        sample += d;
        sample += '\n';
      }
    } else {
      for (const std::string& d :
           load_corpus(bn_corpus, parse_corpus_format(bn_format))) {
        sample += d;
        sample += '\n';
      }
    }
    const std::vector<BenchRow> rows = bench(v, sample, bn_sizes, bn_repeats);
    write_output(bn_out, bench_to_json(rows).dump(2) + "\n");
    for (const BenchRow& row : rows) {
      std::fprintf(stderr, "%10llu bytes  %8.4f s  %12.0f tokens/s\n",
                   static_cast<unsigned long long>(row.n_bytes), row.seconds,
                   row.tokens_per_sec);
    }
  });

  // --- init-embeddings ----------------------------------------------------
  auto* emb = app.add_subcommand(
      "init-embeddings", "Initialize embedding rows for the composite tokens");
  std::string emb_tokenizer, emb_in, emb_out, emb_manifest;
  double emb_alpha = 0.5;
  bool emb_fallback = false;
  emb->add_option("--tokenizer", emb_tokenizer, "Extended tokenizer file")
      ->required();
  emb->add_option("--embeddings-in", emb_in, "Input embedding matrix")
      ->required();
  emb->add_option("--out", emb_out, "Output embedding matrix")->required();
  emb->add_option("--manifest", emb_manifest,
                  "Write trainable row ids here, one per line");
  emb->add_option("--alpha", emb_alpha, "Norm scale for new rows")
      ->default_val(0.5);
  emb->add_flag("--fallback-first", emb_fallback,
                "On a zero mean vector, fall back to the first constituent");
  emb->callback([&] {
    const MedTpeVocabulary v = MedTpeVocabulary::load(emb_tokenizer);
    const EmbeddingMatrix in = load_embeddings(emb_in);
    const EmbeddingMatrix out =
        apply_surgery_to_matrix(in, v, emb_alpha, emb_fallback);
    save_embeddings(emb_out, out);
    if (!emb_manifest.empty()) {
      std::ostringstream man;
      write_manifest(man, build_split(v));
      write_output(emb_manifest, man.str());
    }
    std::fprintf(stderr, "initialized %zu rows of %zu x %zu\n",
                 v.replacement_count(), out.rows, out.dim);
  });

  // --- gen-embeddings -----------------------------------------------------
  auto* gemb = app.add_subcommand(
      "gen-embeddings", "Generate a random Gaussian embedding matrix");
  std::string gemb_tokenizer, gemb_out;
  std::uint64_t gemb_rows = 0, gemb_dim = 64, gemb_seed = 42;
  gemb->add_option("--tokenizer", gemb_tokenizer,
                   "Take the row count from this tokenizer's vocabulary");
  gemb->add_option("--rows", gemb_rows, "Row count (overrides --tokenizer)");
  gemb->add_option("--dim", gemb_dim, "Embedding dimension")->default_val(64);
  gemb->add_option("--seed", gemb_seed, "Generator seed")->default_val(42);
  gemb->add_option("--out", gemb_out, "Output embedding matrix")->required();
  gemb->callback([&] {
    std::uint64_t rows = gemb_rows;
    if (rows == 0) {
      if (gemb_tokenizer.empty()) {
        throw config_error("gen-embeddings needs --rows or --tokenizer");
      }
      rows = load_any_tokenizer(gemb_tokenizer).vocab().size();
    }
    save_embeddings(gemb_out, random_embeddings(rows, gemb_dim, gemb_seed));
  });

  // --- import-hf ----------------------------------------------------------
  auto* imp = app.add_subcommand(
      "import-hf",
      "Convert a Hugging Face byte-level BPE tokenizer.json to this format");
  std::string imp_in, imp_out;
  imp->add_option("--input", imp_in, "tokenizer.json path")->required();
  imp->add_option("--out", imp_out, "Converted tokenizer path")->required();
  imp->callback([&] {
    const BaseTokenizer tok = import_hf_tokenizer(detail::read_file(imp_in));
    tok.save(imp_out);
    std::fprintf(stderr, "imported %zu tokens\n",
                 static_cast<std::size_t>(tok.vocab().size()));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad flags are configuration errors
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const medtpe::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const medtpe::capacity_error& e) {
    std::fprintf(stderr, "error: %s (max feasible: %llu)\n", e.what(),
                 static_cast<unsigned long long>(e.max_feasible()));
    return 4;
  } catch (const medtpe::integrity_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const medtpe::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
}
