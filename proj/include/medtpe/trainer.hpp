#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

struct TrainerConfig {
  std::size_t vocab_size = 16384;    // target |V| counting bytes and specials
  std::uint64_t min_pair_count = 2;  // stop once no pair reaches this count
  std::vector<std::string> specials; // appended after the last merge product
};

// Word-dictionary BPE trainer. Counts pre-tokens, then greedily merges the
// most frequent adjacent symbol pair until the vocabulary target is reached,
// updating pair counts incrementally through a word index and a lazy
// max-heap. Deterministic for a fixed input: ties break on the smaller
// (left, right) symbol-id pair, and ids follow first-creation order.
class BpeTrainer {
public:
  explicit BpeTrainer(TrainerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.vocab_size < kByteAlphabetSize + cfg_.specials.size()) {
      throw config_error("vocab_size " + std::to_string(cfg_.vocab_size) +
                         " cannot hold the byte alphabet plus " +
                         std::to_string(cfg_.specials.size()) + " specials");
    }
  }

  void add_word(std::string_view word, std::uint64_t count) {
    if (word.empty() || count == 0) return;
    word_counts_[std::string(word)] += count;
  }

  void add_text(std::string_view text) {
    for (const std::string_view piece : pretokenize(text)) add_word(piece, 1);
  }

  std::size_t distinct_words() const { return word_counts_.size(); }

  BaseTokenizer train() {
    init_symbols();
    init_words();
    init_pair_index();

    const std::size_t max_merges =
        cfg_.vocab_size - kByteAlphabetSize - cfg_.specials.size();
    std::vector<MergeRule> merges;
    merges.reserve(max_merges);

    while (merges.size() < max_merges) {
      const auto best = pop_best_pair();
      if (!best) break;
      const auto [key, count] = *best;
      const std::uint32_t left = static_cast<std::uint32_t>(key >> 32);
      const std::uint32_t right = static_cast<std::uint32_t>(key & 0xffffffffu);
      const std::string product = sym_str_[left] + sym_str_[right];
      if (str_to_sym_.count(product)) {
        // A different merge already yields this byte string; keeping the
        // pair would create a duplicate token, so retire it instead.
        banned_.insert(key);
        continue;
      }
      const std::uint32_t product_sym = intern(product);
      MergeRule rule;
      rule.left = sym_str_[left];
      rule.right = sym_str_[right];
      rule.rank = static_cast<std::uint32_t>(merges.size());
      merges.push_back(std::move(rule));
      apply_merge(key, left, right, product_sym);
    }

    std::vector<std::string> id_to_token;
    id_to_token.reserve(kByteAlphabetSize + merges.size() + cfg_.specials.size());
    for (unsigned b = 0; b < kByteAlphabetSize; ++b) {
      id_to_token.push_back(std::string(1, static_cast<char>(b)));
    }
    for (const auto& m : merges) id_to_token.push_back(m.product());
    std::unordered_set<std::string> special_set;
    for (const auto& s : cfg_.specials) {
      id_to_token.push_back(s);
      special_set.insert(s);
    }
    return BaseTokenizer(Vocabulary(std::move(id_to_token), std::move(special_set)),
                         std::move(merges));
  }

private:
  struct Word {
    std::vector<std::uint32_t> syms;
    std::uint64_t count = 0;
  };

  struct HeapEntry {
    std::int64_t count;
    std::uint64_t key;
  };

  struct HeapLess {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.count != b.count) return a.count < b.count;
      return a.key > b.key;  // smaller symbol pair wins ties
    }
  };

  std::uint32_t intern(const std::string& s) {
    const auto sym = static_cast<std::uint32_t>(sym_str_.size());
    sym_str_.push_back(s);
    str_to_sym_.emplace(s, sym);
    return sym;
  }

  void init_symbols() {
    sym_str_.clear();
    str_to_sym_.clear();
    sym_str_.reserve(kByteAlphabetSize);
    for (unsigned b = 0; b < kByteAlphabetSize; ++b) {
      intern(std::string(1, static_cast<char>(b)));
    }
  }

  void init_words() {
    std::vector<const std::pair<const std::string, std::uint64_t>*> items;
    items.reserve(word_counts_.size());
    for (const auto& kv : word_counts_) items.push_back(&kv);
    std::sort(items.begin(), items.end(),
              [](const auto* a, const auto* b) { return a->first < b->first; });
    words_.clear();
    words_.reserve(items.size());
    for (const auto* kv : items) {
      Word w;
      w.count = kv->second;
      w.syms.reserve(kv->first.size());
      for (const char c : kv->first) {
        w.syms.push_back(static_cast<unsigned char>(c));
      }
      words_.push_back(std::move(w));
    }
    touched_.assign(words_.size(), 0);
  }

  void init_pair_index() {
    pair_counts_.clear();
    pair_words_.clear();
    banned_.clear();
    heap_ = {};
    for (std::uint32_t w = 0; w < words_.size(); ++w) {
      const Word& word = words_[w];
      for (std::size_t i = 0; i + 1 < word.syms.size(); ++i) {
        const std::uint64_t key = detail::pack_pair(word.syms[i], word.syms[i + 1]);
        pair_counts_[key] += static_cast<std::int64_t>(word.count);
        auto& list = pair_words_[key];
        if (list.empty() || list.back() != w) list.push_back(w);
      }
    }
    for (const auto& [key, count] : pair_counts_) {
      heap_.push(HeapEntry{count, key});
    }
  }

  // Pops heap entries until one matches the live count for its pair. Stale
  // entries whose pair is still viable are re-pushed with the true count so
  // the heap always covers every candidate.
  std::optional<std::pair<std::uint64_t, std::int64_t>> pop_best_pair() {
    while (!heap_.empty()) {
      const HeapEntry top = heap_.top();
      heap_.pop();
      if (banned_.count(top.key)) continue;
      const auto it = pair_counts_.find(top.key);
      const std::int64_t live = it == pair_counts_.end() ? 0 : it->second;
      if (live < static_cast<std::int64_t>(cfg_.min_pair_count)) continue;
      if (live == top.count) return std::make_pair(top.key, live);
      if (live < top.count) heap_.push(HeapEntry{live, top.key});
      // live > top.count means a fresher entry is already queued.
    }
    return std::nullopt;
  }

  void apply_merge(std::uint64_t key, std::uint32_t left, std::uint32_t right,
                   std::uint32_t product_sym) {
    ++epoch_;
    auto list_it = pair_words_.find(key);
    if (list_it == pair_words_.end()) return;
    // The list is moved out because the rewrite below may touch pair_words_.
    const std::vector<std::uint32_t> owners = std::move(list_it->second);
    pair_words_.erase(list_it);
    for (const std::uint32_t w : owners) {
      if (touched_[w] == epoch_) continue;
      touched_[w] = epoch_;
      rewrite_word(w, left, right, product_sym);
    }
    pair_counts_.erase(key);
  }

  void rewrite_word(std::uint32_t w, std::uint32_t left, std::uint32_t right,
                    std::uint32_t product_sym) {
    Word& word = words_[w];
    auto& syms = word.syms;
    bool contains = false;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (syms[i] == left && syms[i + 1] == right) {
        contains = true;
        break;
      }
    }
    if (!contains) return;  // stale index entry

    const auto count = static_cast<std::int64_t>(word.count);
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      pair_counts_[detail::pack_pair(syms[i], syms[i + 1])] -= count;
    }

    std::size_t out = 0;
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        syms[out++] = product_sym;
        i += 2;
      } else {
        syms[out++] = syms[i++];
      }
    }
    syms.resize(out);

    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const std::uint64_t pair = detail::pack_pair(syms[i], syms[i + 1]);
      const std::int64_t now = (pair_counts_[pair] += count);
      heap_.push(HeapEntry{now, pair});
      if (syms[i] == product_sym || syms[i + 1] == product_sym) {
        pair_words_[pair].push_back(w);
      }
    }
  }

  TrainerConfig cfg_;
  std::unordered_map<std::string, std::uint64_t> word_counts_;
  std::vector<std::string> sym_str_;
  std::unordered_map<std::string, std::uint32_t> str_to_sym_;
  std::vector<Word> words_;
  std::vector<std::uint64_t> touched_;
  std::uint64_t epoch_ = 0;
  std::unordered_map<std::uint64_t, std::int64_t> pair_counts_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words_;
  std::unordered_set<std::uint64_t> banned_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapLess> heap_;
};

}  // namespace medtpe
