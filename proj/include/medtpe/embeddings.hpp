#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medtpe/base_tokenizer.hpp"
#include "medtpe/errors.hpp"
#include "medtpe/surgery.hpp"
#include "medtpe/vocabulary.hpp"

namespace medtpe {

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // row-major

  static EmbeddingMatrix zeros(std::size_t rows, std::size_t dim) {
    EmbeddingMatrix m;
    m.rows = rows;
    m.dim = dim;
    m.data.assign(rows * dim, 0.0f);
    return m;
  }

  float* row(std::size_t i) { return data.data() + i * dim; }
  const float* row(std::size_t i) const { return data.data() + i * dim; }
};

// Which rows downstream fine-tuning may update: exactly the ids the inserted
// TPE tokens took over. Everything else stays frozen.
struct EmbeddingSplit {
  std::vector<token_id> fixed_ids;      // ascending
  std::vector<token_id> trainable_ids;  // ascending
};

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  const char buf[4] = {static_cast<char>(v & 0xff),
                       static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 24) & 0xff)};
  out.write(buf, 4);
}

inline std::uint32_t get_u32_le(std::istream& in, const char* what) {
  char buf[4];
  in.read(buf, 4);
  if (in.gcount() != 4) {
    throw format_error(std::string("embedding file truncated reading ") + what);
  }
  return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[3])) << 24);
}

}  // namespace detail

// Binary layout: magic "MEMB", then version, row count, and dimension as
// little-endian u32, then rows×dim IEEE-754 binary32 values, row-major.
inline void write_embeddings(std::ostream& out, const EmbeddingMatrix& m) {
  for (const float v : m.data) {
    if (!std::isfinite(v)) {
      throw integrity_error("embedding matrix contains a non-finite entry");
    }
  }
  out.write("MEMB", 4);
  detail::put_u32_le(out, 1);
  detail::put_u32_le(out, static_cast<std::uint32_t>(m.rows));
  detail::put_u32_le(out, static_cast<std::uint32_t>(m.dim));
  for (const float v : m.data) {
    detail::put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out.good()) throw io_error("failed writing embedding matrix");
}

inline EmbeddingMatrix read_embeddings(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "MEMB") {
    throw format_error("embedding file lacks the MEMB magic");
  }
  const std::uint32_t version = detail::get_u32_le(in, "version");
  if (version != 1) {
    throw format_error("unsupported embedding file version " +
                       std::to_string(version));
  }
  EmbeddingMatrix m;
  m.rows = detail::get_u32_le(in, "row count");
  m.dim = detail::get_u32_le(in, "dimension");
  m.data.resize(m.rows * m.dim);
  for (float& v : m.data) {
    v = std::bit_cast<float>(detail::get_u32_le(in, "matrix data"));
    if (!std::isfinite(v)) {
      throw integrity_error("embedding matrix contains a non-finite entry");
    }
  }
  return m;
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path + " for writing");
  write_embeddings(out, m);
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  return read_embeddings(in);
}

// μ: the plain arithmetic mean of the row ℓ₂ norms, taken over the original
// vocabulary's matrix before any rows are replaced.
inline double mean_vocab_norm(const EmbeddingMatrix& m) {
  if (m.rows == 0) throw domain_error("mean norm of an empty matrix is undefined");
  double total = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const float* row = m.row(r);
    double sq = 0.0;
    for (std::size_t c = 0; c < m.dim; ++c) {
      sq += static_cast<double>(row[c]) * row[c];
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(m.rows);
}

// New-token row: the mean of the constituents' rows, rescaled to norm α·μ.
// A zero mean direction has no defined rescaling; callers may opt into
// falling back to the first constituent's direction instead of erroring.
inline std::vector<float> init_tpe_embedding(const EmbeddingMatrix& m,
                                             const std::vector<token_id>& constituents,
                                             double alpha, double mu,
                                             bool fallback_first = false) {
  if (constituents.empty()) {
    throw config_error("embedding init needs at least one constituent");
  }
  std::vector<double> mean(m.dim, 0.0);
  for (const token_id id : constituents) {
    if (id >= m.rows) {
      throw lookup_error("constituent id " + std::to_string(id) +
                         " is outside the embedding matrix");
    }
    const float* row = m.row(id);
    for (std::size_t c = 0; c < m.dim; ++c) mean[c] += row[c];
  }
  for (double& v : mean) v /= static_cast<double>(constituents.size());

  double sq = 0.0;
  for (const double v : mean) sq += v * v;
  double norm = std::sqrt(sq);
  if (norm == 0.0) {
    if (!fallback_first) {
      throw degenerate_error("constituent embeddings cancel to a zero mean vector");
    }
    const float* row = m.row(constituents.front());
    sq = 0.0;
    for (std::size_t c = 0; c < m.dim; ++c) {
      mean[c] = row[c];
      sq += mean[c] * mean[c];
    }
    norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw degenerate_error("first constituent's embedding is the zero vector");
    }
  }

  const double scale = alpha * mu / norm;
  std::vector<float> out(m.dim);
  for (std::size_t c = 0; c < m.dim; ++c) {
    out[c] = static_cast<float>(mean[c] * scale);
  }
  return out;
}

inline EmbeddingSplit build_split(const MedTpeVocabulary& v) {
  EmbeddingSplit split;
  split.trainable_ids.reserve(v.replacement_count());
  for (std::size_t k = 0; k < v.replacement_count(); ++k) {
    split.trainable_ids.push_back(v.replaced_id(k));
  }
  std::sort(split.trainable_ids.begin(), split.trainable_ids.end());
  split.fixed_ids.reserve(v.vocab().size() - split.trainable_ids.size());
  std::size_t next = 0;
  for (token_id id = 0; id < v.vocab().size(); ++id) {
    if (next < split.trainable_ids.size() && split.trainable_ids[next] == id) {
      ++next;
    } else {
      split.fixed_ids.push_back(id);
    }
  }
  return split;
}

// Replaces each taken-over row with the initialized embedding of the TPE
// token now owning that id; every other row passes through bit-identical.
inline EmbeddingMatrix apply_surgery_to_matrix(const EmbeddingMatrix& m,
                                               const MedTpeVocabulary& v,
                                               double alpha,
                                               bool fallback_first = false) {
  if (m.rows != v.base().vocab().size()) {
    throw shape_error("matrix has " + std::to_string(m.rows) +
                      " rows but the vocabulary holds " +
                      std::to_string(v.base().vocab().size()) + " tokens");
  }
  if (!(alpha > 0.0)) {
    throw config_error("alpha must be positive");
  }
  const double mu = mean_vocab_norm(m);
  EmbeddingMatrix out = m;
  for (std::size_t k = 0; k < v.replacement_count(); ++k) {
    std::vector<token_id> constituent_ids;
    constituent_ids.reserve(v.insertion_constituents(k).size());
    for (const std::string& c : v.insertion_constituents(k)) {
      constituent_ids.push_back(v.vocab().id_of(c));
    }
    const std::vector<float> row =
        init_tpe_embedding(m, constituent_ids, alpha, mu, fallback_first);
    std::copy(row.begin(), row.end(), out.row(v.replaced_id(k)));
  }
  return out;
}

inline void write_manifest(std::ostream& out, const EmbeddingSplit& split) {
  for (const token_id id : split.trainable_ids) {
    out << id << '\n';
  }
  if (!out.good()) throw io_error("failed writing trainable-id manifest");
}

// Deterministic random matrix for bootstrapping and tests: Box–Muller over
// a seeded 64-bit generator, so identical seeds give identical bytes on any
// platform.
inline EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t dim,
                                         std::uint64_t seed, float stddev = 0.02f) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  };
  EmbeddingMatrix m = EmbeddingMatrix::zeros(rows, dim);
  for (std::size_t i = 0; i < m.data.size(); i += 2) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    m.data[i] = static_cast<float>(r * std::cos(2.0 * 3.141592653589793 * u2) * stddev);
    if (i + 1 < m.data.size()) {
      m.data[i + 1] =
          static_cast<float>(r * std::sin(2.0 * 3.141592653589793 * u2) * stddev);
    }
  }
  return m;
}

}  // namespace medtpe
