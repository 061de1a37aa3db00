#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "medtpe/errors.hpp"
#include "medtpe/text_util.hpp"

namespace medtpe {

enum class corpus_format { lines, json_lines };

inline corpus_format parse_corpus_format(std::string_view name) {
  if (name == "lines") return corpus_format::lines;
  if (name == "jsonl" || name == "json-lines") return corpus_format::json_lines;
  throw config_error("unknown corpus format \"" + std::string(name) +
                     "\" (expected lines or jsonl)");
}

// Yields one document per non-empty input line, in file order. `lines` mode
// passes line bytes through untouched; `json_lines` parses each line as an
// object and extracts its "text" field. Errors cite the 1-based line number.
template <typename Fn>
void for_each_document(const std::string& path, corpus_format format, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open corpus " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (format == corpus_format::lines) {
      fn(line);
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw format_error(path + " line " + std::to_string(lineno) +
                         ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw format_error(path + " line " + std::to_string(lineno) +
                         ": expected an object with a string \"text\" field");
    }
    fn(j["text"].get_ref<const std::string&>());
  }
  if (in.bad()) throw io_error("failed reading corpus " + path);
}

inline std::vector<std::string> load_corpus(const std::string& path,
                                            corpus_format format) {
  std::vector<std::string> docs;
  for_each_document(path, format,
                    [&](const std::string& doc) { docs.push_back(doc); });
  return docs;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(chunk_index, begin, end) over contiguous chunks of [0, n) on up to
// `threads` worker threads. Chunk indices let callers merge per-chunk results
// in a fixed order, keeping parallel aggregation deterministic.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (n == 0) return;
  const std::size_t max_chunks = (n < threads) ? n : threads;
  if (max_chunks <= 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(max_chunks);
  const std::size_t base = n / max_chunks;
  const std::size_t extra = n % max_chunks;
  std::size_t begin = 0;
  for (std::size_t c = 0; c < max_chunks; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    const std::size_t end = begin + len;
    workers.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
    begin = end;
  }
  for (auto& w : workers) w.join();
}

}  // namespace medtpe
