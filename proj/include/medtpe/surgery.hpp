#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/corpus.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/mining.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

// Left-to-right fold of a candidate's constituents: pair k joins the
// concatenation of constituents[0..k] with constituents[k+1].
struct MergePath {
  std::vector<std::pair<std::string, std::string>> pairs;
};

inline MergePath build_merge_path(const TpeCandidate& c) {
  if (c.constituents.size() < 2) {
    throw config_error("merge path needs at least 2 constituents, got " +
                       std::to_string(c.constituents.size()));
  }
  MergePath path;
  path.pairs.reserve(c.constituents.size() - 1);
  std::string prefix = c.constituents[0];
  for (std::size_t k = 1; k < c.constituents.size(); ++k) {
    path.pairs.emplace_back(prefix, c.constituents[k]);
    prefix += c.constituents[k];
  }
  return path;
}

// Concatenated merge paths of the insertion set in rank order, first
// occurrence of each pair kept. origin records which candidate contributed a
// pair first. Because every path lists a prefix's producing pair before the
// pair that consumes the prefix, the deduplicated table stays resolvable in
// order.
struct TpeMergeTable {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::pair<std::string, std::string>, std::uint32_t> origin;
};

inline TpeMergeTable build_tpe_merge_table(
    const std::vector<TpeCandidate>& insertion) {
  TpeMergeTable table;
  for (std::uint32_t rank = 0; rank < insertion.size(); ++rank) {
    const MergePath path = build_merge_path(insertion[rank]);
    for (const auto& pair : path.pairs) {
      if (table.origin.emplace(pair, rank).second) {
        table.pairs.push_back(pair);
      }
    }
  }
  return table;
}

// Every vocabulary token that any insertion's merge path touches, closed
// recursively over the base tokenizer's own merge rules down to byte leaves.
// Composite path prefixes that are not vocabulary members carry no id to
// protect and are skipped; ones that coincide with a real token are
// protected like any constituent.
inline std::unordered_set<std::string> dependent_set(
    const std::vector<TpeCandidate>& insertion, const BaseTokenizer& base) {
  std::unordered_set<std::string> out;
  const auto add_with_closure = [&](const std::string& tok) {
    if (!base.vocab().contains(tok)) return;
    if (!out.insert(tok).second) return;
    for (const auto& [left, right] : base.merge_path(tok)) {
      out.insert(left);
      out.insert(right);
    }
  };
  for (const TpeCandidate& cand : insertion) {
    for (const std::string& c : cand.constituents) {
      if (!base.vocab().contains(c)) {
        throw integrity_error("insertion constituent \"" + c +
                              "\" is not a base vocabulary token");
      }
    }
    for (const auto& [left, right] : build_merge_path(cand).pairs) {
      add_with_closure(left);
      add_with_closure(right);
    }
  }
  return out;
}

// Occurrence count of every base token over the base-encoded corpus; tokens
// never seen map to zero.
inline std::unordered_map<std::string, std::uint64_t> token_frequencies(
    const BaseTokenizer& tok, const std::vector<std::string>& corpus,
    unsigned threads = 1) {
  const std::size_t n_tokens = tok.vocab().size();
  std::vector<std::uint64_t> counts(n_tokens, 0);
  threads = resolve_threads(threads);
  if (threads <= 1 || corpus.size() <= 1) {
    WordCache cache;
    for (const std::string& doc : corpus) {
      for (const token_id id : tok.encode(doc, cache)) ++counts[id];
    }
  } else {
    const std::size_t chunks = std::min<std::size_t>(threads, corpus.size());
    std::vector<std::vector<std::uint64_t>> partial(
        chunks, std::vector<std::uint64_t>(n_tokens, 0));
    parallel_chunks(corpus.size(), threads,
                    [&](std::size_t c, std::size_t begin, std::size_t end) {
                      WordCache cache;
                      for (std::size_t d = begin; d < end; ++d) {
                        for (const token_id id : tok.encode(corpus[d], cache)) {
                          ++partial[c][id];
                        }
                      }
                    });
    for (const auto& part : partial) {
      for (std::size_t i = 0; i < n_tokens; ++i) counts[i] += part[i];
    }
  }
  std::unordered_map<std::string, std::uint64_t> out;
  out.reserve(n_tokens * 2);
  for (token_id id = 0; id < n_tokens; ++id) {
    out.emplace(tok.vocab().token_of(id), counts[id]);
  }
  return out;
}

// The m rarest unprotected tokens. Byte tokens and specials are always kept;
// ties at equal frequency prefer evicting the longer surface (rare long
// tokens cost the least when decomposed), then the lexicographically smaller.
inline std::vector<std::string> select_eviction(
    const BaseTokenizer& base, const std::unordered_set<std::string>& protected_set,
    const std::unordered_map<std::string, std::uint64_t>& freqs, std::uint64_t m) {
  struct Entry {
    const std::string* token;
    std::uint64_t freq;
  };
  std::vector<Entry> unprotected;
  const Vocabulary& vocab = base.vocab();
  for (token_id id = 0; id < vocab.size(); ++id) {
    const std::string& tok = vocab.token_of(id);
    if (vocab.is_byte_token(tok) || vocab.is_special(tok)) continue;
    if (protected_set.count(tok)) continue;
    const auto it = freqs.find(tok);
    unprotected.push_back({&tok, it == freqs.end() ? 0 : it->second});
  }
  if (unprotected.size() < m) {
    throw capacity_error("eviction budget " + std::to_string(m) +
                             " exceeds the " + std::to_string(unprotected.size()) +
                             " unprotected tokens available",
                         unprotected.size());
  }
  std::sort(unprotected.begin(), unprotected.end(),
            [](const Entry& a, const Entry& b) {
              if (a.freq != b.freq) return a.freq < b.freq;
              if (a.token->size() != b.token->size()) {
                return a.token->size() > b.token->size();
              }
              return *a.token < *b.token;
            });
  std::vector<std::string> out;
  out.reserve(m);
  for (std::uint64_t i = 0; i < m; ++i) out.push_back(*unprotected[i].token);
  return out;
}

// The assembled tokenizer after surgery: the base vocabulary with its m
// evicted entries replaced in-place (same ids) by the inserted composite
// tokens, plus the structured merge table driving the layered encoder and
// the decomposition used to re-express evicted tokens losslessly.
class MedTpeVocabulary {
public:
  MedTpeVocabulary(BaseTokenizer base, TpeMergeTable tpe_merges,
                   std::vector<std::vector<std::string>> insertion,
                   std::vector<std::string> eviction,
                   std::unordered_map<std::string, std::vector<std::string>>
                       decomposition,
                   unsigned n_max, std::uint64_t budget_m,
                   std::string corpus_digest)
      : base_(std::move(base)),
        tpe_merges_(std::move(tpe_merges)),
        insertion_(std::move(insertion)),
        eviction_(std::move(eviction)),
        decomposition_(std::move(decomposition)),
        n_max_(n_max),
        budget_m_(budget_m),
        corpus_digest_(std::move(corpus_digest)) {
    build_star_vocab();
    validate();
  }

  const BaseTokenizer& base() const { return base_; }
  const Vocabulary& vocab() const { return star_vocab_; }
  const TpeMergeTable& tpe_merges() const { return tpe_merges_; }
  const std::vector<std::string>& insertion_surfaces() const { return surfaces_; }
  const std::vector<std::string>& eviction() const { return eviction_; }
  std::size_t replacement_count() const { return insertion_.size(); }
  unsigned n_max() const { return n_max_; }
  std::uint64_t budget_m() const { return budget_m_; }
  const std::string& corpus_digest() const { return corpus_digest_; }

  const std::vector<std::string>& insertion_constituents(std::size_t k) const {
    return insertion_.at(k);
  }

  // Id shared by eviction[k] in the base vocabulary and insertion k in V★.
  token_id replaced_id(std::size_t k) const { return replaced_ids_.at(k); }

  bool is_evicted(std::string_view tok) const {
    return evicted_set_.count(std::string(tok)) != 0;
  }

  bool is_tpe_id(token_id id) const {
    return id < tpe_id_flags_.size() && tpe_id_flags_[id];
  }

  const std::vector<std::string>& decomposition_of(const std::string& evicted) const {
    const auto it = decomposition_.find(evicted);
    if (it == decomposition_.end()) {
      throw lookup_error("token \"" + evicted + "\" has no decomposition");
    }
    return it->second;
  }

  static MedTpeVocabulary load(const std::string& path) {
    return from_json_text(detail::read_file(path), path);
  }

  static MedTpeVocabulary from_json_text(const std::string& text,
                                         const std::string& origin = "<memory>");

  void save(const std::string& path) const {
    detail::write_file(path, to_json_text());
  }

  std::string to_json_text() const;

private:
  void build_star_vocab() {
    if (insertion_.size() != eviction_.size()) {
      throw integrity_error("insertion holds " +
                            std::to_string(insertion_.size()) +
                            " entries but eviction holds " +
                            std::to_string(eviction_.size()));
    }
    surfaces_.clear();
    surfaces_.reserve(insertion_.size());
    for (const auto& constituents : insertion_) {
      if (constituents.size() < 2) {
        throw integrity_error("an insertion entry has fewer than 2 constituents");
      }
      std::string surface;
      for (const auto& c : constituents) surface += c;
      surfaces_.push_back(std::move(surface));
    }

    const Vocabulary& base_vocab = base_.vocab();
    std::vector<std::string> id_to_token;
    id_to_token.reserve(base_vocab.size());
    for (token_id id = 0; id < base_vocab.size(); ++id) {
      id_to_token.push_back(base_vocab.token_of(id));
    }
    replaced_ids_.clear();
    replaced_ids_.reserve(eviction_.size());
    evicted_set_.clear();
    for (std::size_t k = 0; k < eviction_.size(); ++k) {
      const std::string& evicted = eviction_[k];
      if (base_vocab.is_byte_token(evicted)) {
        throw integrity_error("byte token \"" + evicted + "\" cannot be evicted");
      }
      if (base_vocab.is_special(evicted)) {
        throw integrity_error("special token \"" + evicted + "\" cannot be evicted");
      }
      const token_id id = base_vocab.find(evicted);
      if (id == kInvalidToken) {
        throw integrity_error("evicted token \"" + evicted +
                              "\" is not in the base vocabulary");
      }
      if (!evicted_set_.insert(evicted).second) {
        throw integrity_error("token \"" + evicted + "\" evicted twice");
      }
      id_to_token[id] = surfaces_[k];
      replaced_ids_.push_back(id);
    }
    std::unordered_set<std::string> specials(base_vocab.specials().begin(),
                                             base_vocab.specials().end());
    star_vocab_ = Vocabulary(std::move(id_to_token), std::move(specials));

    tpe_id_flags_.assign(star_vocab_.size(), false);
    for (const token_id id : replaced_ids_) tpe_id_flags_[id] = true;
  }

  void validate() const {
    if (n_max_ < 2 || n_max_ > 8) {
      throw integrity_error("stored n_max " + std::to_string(n_max_) +
                            " lies outside [2, 8]");
    }
    for (const auto& constituents : insertion_) {
      for (const auto& c : constituents) {
        if (!star_vocab_.contains(c)) {
          throw integrity_error("insertion constituent \"" + c +
                                "\" is missing from the surgered vocabulary");
        }
        if (evicted_set_.count(c)) {
          throw integrity_error("insertion constituent \"" + c +
                                "\" was itself evicted");
        }
      }
    }

    // Surfaces must be unique: they own exactly one id in the vocabulary.
    std::unordered_set<std::string> surface_set;
    for (const auto& s : surfaces_) {
      if (!surface_set.insert(s).second) {
        throw integrity_error("insertion surface \"" + s + "\" appears twice");
      }
      if (evicted_set_.count(s)) {
        throw integrity_error("surface \"" + s +
                              "\" is simultaneously inserted and evicted");
      }
    }

    // Each evicted token must decompose into preserved tokens reproducing
    // its exact byte string.
    if (decomposition_.size() != eviction_.size()) {
      throw integrity_error("decomposition covers " +
                            std::to_string(decomposition_.size()) +
                            " tokens but " + std::to_string(eviction_.size()) +
                            " were evicted");
    }
    for (const auto& evicted : eviction_) {
      const auto it = decomposition_.find(evicted);
      if (it == decomposition_.end()) {
        throw integrity_error("evicted token \"" + evicted +
                              "\" lacks a decomposition");
      }
      std::string joined;
      for (const auto& part : it->second) {
        if (!star_vocab_.contains(part) || evicted_set_.count(part)) {
          throw integrity_error("decomposition part \"" + part + "\" of \"" +
                                evicted + "\" is not a preserved token");
        }
        joined += part;
      }
      if (joined != evicted) {
        throw integrity_error("decomposition of \"" + evicted +
                              "\" concatenates to \"" + joined + "\"");
      }
    }

    verify_resolvable();

    // Every insertion surface must be producible by some table pair, or the
    // encoder could never emit it.
    std::unordered_set<std::string> products;
    for (const auto& [l, r] : tpe_merges_.pairs) products.insert(l + r);
    for (const auto& s : surfaces_) {
      if (!products.count(s)) {
        throw integrity_error("insertion surface \"" + s +
                              "\" is not produced by any merge-table pair");
      }
    }
  }

  // Walks the merge table in order, checking each side is either a
  // vocabulary token or a composite built by an earlier pair.
  void verify_resolvable() const {
    std::unordered_set<std::string> producible;
    for (const auto& [left, right] : tpe_merges_.pairs) {
      if (!star_vocab_.contains(left) && !producible.count(left)) {
        throw integrity_error("merge-table left side \"" + left +
                              "\" is neither a vocabulary token nor an earlier product");
      }
      if (!star_vocab_.contains(right) && !producible.count(right)) {
        throw integrity_error("merge-table right side \"" + right +
                              "\" is neither a vocabulary token nor an earlier product");
      }
      producible.insert(left + right);
    }
  }

  BaseTokenizer base_;
  Vocabulary star_vocab_;
  TpeMergeTable tpe_merges_;
  std::vector<std::vector<std::string>> insertion_;  // constituent splits
  std::vector<std::string> surfaces_;                // concatenated insertions
  std::vector<std::string> eviction_;
  std::vector<token_id> replaced_ids_;
  std::unordered_set<std::string> evicted_set_;
  std::vector<bool> tpe_id_flags_;
  std::unordered_map<std::string, std::vector<std::string>> decomposition_;
  unsigned n_max_ = 2;
  std::uint64_t budget_m_ = 0;
  std::string corpus_digest_;
};

// Expands an evicted token through the base merge rules just far enough that
// every part survives in V★ (parts that were also evicted expand further).
inline std::vector<std::string> decompose_evicted(
    const BaseTokenizer& base, const std::string& evicted,
    const std::unordered_set<std::string>& evicted_set) {
  std::vector<std::string> out;
  const std::size_t depth_limit = base.vocab().size() + 1;
  auto expand = [&](auto&& self, const std::string& tok, std::size_t depth) -> void {
    if (depth > depth_limit) {
      throw integrity_error("decomposition of \"" + evicted +
                            "\" does not terminate");
    }
    if (!evicted_set.count(tok)) {
      out.push_back(tok);
      return;
    }
    const MergeRule& rule = base.producer(tok);
    self(self, rule.left, depth + 1);
    self(self, rule.right, depth + 1);
  };
  const MergeRule& rule = base.producer(evicted);
  expand(expand, rule.left, 0);
  expand(expand, rule.right, 0);
  return out;
}

// Full surgery pipeline: select the insertion set, close its dependencies,
// measure corpus frequencies, pick the eviction set, and assemble V★ with
// the merge table and decompositions. Candidates whose surface already
// exists as a base token are skipped up front — inserting them would give
// one byte string two ids.
inline MedTpeVocabulary dependency_aware_replacement(
    const BaseTokenizer& base, const CandidateTable& table,
    const std::unordered_map<std::string, std::uint64_t>& freqs,
    const std::string& digest, const MiningConfig& cfg) {
  cfg.validate();

  CandidateTable usable;
  usable.rows.reserve(table.rows.size());
  for (const TpeCandidate& row : table.rows) {
    if (base.vocab().contains(row.surface)) continue;
    usable.rows.push_back(row);
  }

  const std::vector<TpeCandidate> insertion =
      select_insertion_set(usable, cfg.budget_m);
  if (insertion.size() < cfg.budget_m) {
    throw capacity_error("budget " + std::to_string(cfg.budget_m) +
                             " exceeds the " + std::to_string(insertion.size()) +
                             " distinct usable candidate surfaces",
                         insertion.size());
  }

  const std::unordered_set<std::string> protected_set =
      dependent_set(insertion, base);
  const std::vector<std::string> eviction =
      select_eviction(base, protected_set, freqs, cfg.budget_m);

  const std::unordered_set<std::string> evicted_set(eviction.begin(),
                                                    eviction.end());
  std::unordered_map<std::string, std::vector<std::string>> decomposition;
  decomposition.reserve(eviction.size() * 2);
  for (const std::string& e : eviction) {
    decomposition.emplace(e, decompose_evicted(base, e, evicted_set));
  }

  std::vector<std::vector<std::string>> insertion_splits;
  insertion_splits.reserve(insertion.size());
  for (const TpeCandidate& cand : insertion) {
    insertion_splits.push_back(cand.constituents);
  }

  return MedTpeVocabulary(base, build_tpe_merge_table(insertion),
                          std::move(insertion_splits), eviction,
                          std::move(decomposition), cfg.n_max, cfg.budget_m,
                          digest);
}

inline MedTpeVocabulary dependency_aware_replacement(
    const BaseTokenizer& base, const CandidateTable& table,
    const std::vector<std::string>& corpus, const MiningConfig& cfg,
    unsigned threads = 1) {
  return dependency_aware_replacement(base, table,
                                      token_frequencies(base, corpus, threads),
                                      corpus_digest(corpus), cfg);
}

inline std::string MedTpeVocabulary::to_json_text() const {
  ordered_json j = ordered_json::object();

  // V★ with the base merge list: swapping insertion and eviction surfaces at
  // their shared ids recovers the original base tokenizer on load.
  ordered_json vocab_obj = ordered_json::object();
  for (token_id id = 0; id < star_vocab_.size(); ++id) {
    vocab_obj[escape_token(star_vocab_.token_of(id))] = id;
  }
  j["vocab"] = std::move(vocab_obj);

  ordered_json merges = ordered_json::array();
  for (const auto& m : base_.merges()) {
    merges.push_back(ordered_json::array({escape_token(m.left), escape_token(m.right)}));
  }
  j["merges"] = std::move(merges);

  std::vector<std::string> specials(star_vocab_.specials().begin(),
                                    star_vocab_.specials().end());
  std::sort(specials.begin(), specials.end(),
            [&](const std::string& a, const std::string& b) {
              return star_vocab_.id_of(a) < star_vocab_.id_of(b);
            });
  ordered_json specials_arr = ordered_json::array();
  for (const auto& s : specials) specials_arr.push_back(escape_token(s));
  j["special_tokens"] = std::move(specials_arr);

  ordered_json tpe = ordered_json::array();
  for (const auto& [l, r] : tpe_merges_.pairs) {
    tpe.push_back(ordered_json::array({escape_token(l), escape_token(r)}));
  }
  j["tpe_merges"] = std::move(tpe);

  // Insertions keep their constituent split (the surface is the
  // concatenation): embedding init needs the exact split, and merge-table
  // products alone cannot always recover it unambiguously.
  ordered_json ins = ordered_json::array();
  for (const auto& constituents : insertion_) {
    ordered_json split = ordered_json::array();
    for (const auto& c : constituents) split.push_back(escape_token(c));
    ins.push_back(std::move(split));
  }
  j["insertion"] = std::move(ins);

  ordered_json ev = ordered_json::array();
  for (const auto& e : eviction_) ev.push_back(escape_token(e));
  j["eviction"] = std::move(ev);

  ordered_json decomp = ordered_json::object();
  for (const auto& e : eviction_) {
    ordered_json parts = ordered_json::array();
    for (const auto& p : decomposition_.at(e)) parts.push_back(escape_token(p));
    decomp[escape_token(e)] = std::move(parts);
  }
  j["decomposition"] = std::move(decomp);

  ordered_json meta = ordered_json::object();
  meta["n_max"] = n_max_;
  meta["budget_m"] = budget_m_;
  meta["corpus_digest"] = corpus_digest_;
  j["meta"] = std::move(meta);

  return j.dump(2) + "\n";
}

inline MedTpeVocabulary MedTpeVocabulary::from_json_text(
    const std::string& text, const std::string& origin) {
  const ordered_json j = detail::parse_json_checked(text, origin);
  if (!j.is_object()) throw format_error(origin + ": top level must be an object");
  for (const char* field :
       {"vocab", "merges", "special_tokens", "tpe_merges", "insertion",
        "eviction", "decomposition", "meta"}) {
    if (!j.contains(field)) {
      throw format_error(origin + ": missing \"" + std::string(field) + "\" field");
    }
  }

  std::vector<std::vector<std::string>> insertion;
  if (!j["insertion"].is_array()) {
    throw format_error(origin + ": \"insertion\" must be an array");
  }
  for (const auto& entry : j["insertion"]) {
    if (!entry.is_array() || entry.size() < 2) {
      throw format_error(origin +
                         ": insertion entries must be arrays of ≥2 constituents");
    }
    std::vector<std::string> split;
    for (const auto& c : entry) {
      if (!c.is_string()) {
        throw format_error(origin + ": insertion constituents must be strings");
      }
      split.push_back(unescape_token(c.get<std::string>()));
    }
    insertion.push_back(std::move(split));
  }

  std::vector<std::string> eviction;
  if (!j["eviction"].is_array()) {
    throw format_error(origin + ": \"eviction\" must be an array");
  }
  for (const auto& e : j["eviction"]) {
    if (!e.is_string()) {
      throw format_error(origin + ": eviction entries must be strings");
    }
    eviction.push_back(unescape_token(e.get<std::string>()));
  }
  if (insertion.size() != eviction.size()) {
    throw integrity_error(origin + ": insertion and eviction sizes differ");
  }

  // Reconstruct the base vocabulary by swapping each inserted surface back
  // to the evicted token it replaced (they share an id by construction).
  const auto& vocab_obj = j["vocab"];
  if (!vocab_obj.is_object()) {
    throw format_error(origin + ": \"vocab\" must be an object");
  }
  std::vector<std::string> star_tokens(vocab_obj.size());
  std::vector<bool> seen(vocab_obj.size(), false);
  std::unordered_map<std::string, token_id> star_ids;
  star_ids.reserve(vocab_obj.size() * 2);
  for (const auto& [escaped, id_value] : vocab_obj.items()) {
    if (!id_value.is_number_unsigned()) {
      throw format_error(origin + ": vocab entry \"" + escaped +
                         "\" has a non-integer id");
    }
    const std::uint64_t id = id_value.get<std::uint64_t>();
    if (id >= vocab_obj.size()) {
      throw integrity_error(origin + ": vocab ids are not dense");
    }
    if (seen[id]) {
      throw integrity_error(origin + ": duplicate vocab id " + std::to_string(id));
    }
    seen[id] = true;
    star_tokens[id] = unescape_token(escaped);
    star_ids.emplace(star_tokens[id], static_cast<token_id>(id));
  }

  std::vector<std::string> base_tokens = star_tokens;
  for (std::size_t k = 0; k < insertion.size(); ++k) {
    std::string surface;
    for (const auto& c : insertion[k]) surface += c;
    const auto it = star_ids.find(surface);
    if (it == star_ids.end()) {
      throw integrity_error(origin + ": insertion surface \"" + surface +
                            "\" is missing from the vocab table");
    }
    base_tokens[it->second] = eviction[k];
  }

  std::unordered_set<std::string> specials;
  if (!j["special_tokens"].is_array()) {
    throw format_error(origin + ": \"special_tokens\" must be an array");
  }
  for (const auto& s : j["special_tokens"]) {
    if (!s.is_string()) {
      throw format_error(origin + ": special_tokens entries must be strings");
    }
    specials.insert(unescape_token(s.get<std::string>()));
  }

  std::vector<MergeRule> merges;
  if (!j["merges"].is_array()) {
    throw format_error(origin + ": \"merges\" must be an array");
  }
  for (const auto& m : j["merges"]) {
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string()) {
      throw format_error(origin + ": merges entries must be two-string arrays");
    }
    MergeRule rule;
    rule.left = unescape_token(m[0].get<std::string>());
    rule.right = unescape_token(m[1].get<std::string>());
    rule.rank = static_cast<std::uint32_t>(merges.size());
    merges.push_back(std::move(rule));
  }

  BaseTokenizer base(Vocabulary(std::move(base_tokens), std::move(specials)),
                     std::move(merges));

  std::vector<std::pair<std::string, std::string>> stored_pairs;
  if (!j["tpe_merges"].is_array()) {
    throw format_error(origin + ": \"tpe_merges\" must be an array");
  }
  for (const auto& m : j["tpe_merges"]) {
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string()) {
      throw format_error(origin + ": tpe_merges entries must be two-string arrays");
    }
    stored_pairs.emplace_back(unescape_token(m[0].get<std::string>()),
                              unescape_token(m[1].get<std::string>()));
  }
  // The table is fully determined by the insertion list (concatenated merge
  // paths, first occurrence kept); a file whose stored pairs disagree with
  // that rebuild is corrupt. Rebuilding also restores origin ranks.
  std::vector<TpeCandidate> rebuilt_candidates;
  rebuilt_candidates.reserve(insertion.size());
  for (const auto& split : insertion) {
    TpeCandidate cand;
    cand.constituents = split;
    for (const auto& c : split) cand.surface += c;
    rebuilt_candidates.push_back(std::move(cand));
  }
  TpeMergeTable table = build_tpe_merge_table(rebuilt_candidates);
  if (table.pairs != stored_pairs) {
    throw integrity_error(origin +
                          ": tpe_merges does not match the insertion set's merge paths");
  }

  std::unordered_map<std::string, std::vector<std::string>> decomposition;
  if (!j["decomposition"].is_object()) {
    throw format_error(origin + ": \"decomposition\" must be an object");
  }
  for (const auto& [escaped, parts] : j["decomposition"].items()) {
    if (!parts.is_array()) {
      throw format_error(origin + ": decomposition values must be arrays");
    }
    std::vector<std::string> out;
    for (const auto& p : parts) {
      if (!p.is_string()) {
        throw format_error(origin + ": decomposition parts must be strings");
      }
      out.push_back(unescape_token(p.get<std::string>()));
    }
    decomposition.emplace(unescape_token(escaped), std::move(out));
  }

  const auto& meta = j["meta"];
  if (!meta.is_object() || !meta.contains("n_max") ||
      !meta["n_max"].is_number_unsigned() || !meta.contains("budget_m") ||
      !meta["budget_m"].is_number_unsigned() ||
      !meta.contains("corpus_digest") || !meta["corpus_digest"].is_string()) {
    throw format_error(origin +
                       ": \"meta\" needs n_max, budget_m, and corpus_digest");
  }

  return MedTpeVocabulary(std::move(base), std::move(table), std::move(insertion),
                          std::move(eviction), std::move(decomposition),
                          meta["n_max"].get<unsigned>(),
                          meta["budget_m"].get<std::uint64_t>(),
                          meta["corpus_digest"].get<std::string>());
}

}  // namespace medtpe
