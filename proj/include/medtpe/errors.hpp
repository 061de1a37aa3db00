#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace medtpe {

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input file: bad JSON, wrong types, bad escapes. Messages name
// the offending line or field where known.
class format_error : public error {
public:
  using error::error;
};

// Structurally invalid data: merge rules referencing unknown tokens,
// duplicate entries, unresolvable merge tables.
class integrity_error : public error {
public:
  using error::error;
};

// Unknown token string or out-of-range token id.
class lookup_error : public error {
public:
  using error::error;
};

// Invalid configuration values (n_max out of range, bad flags).
class config_error : public error {
public:
  using error::error;
};

// Requested eviction budget exceeds the unprotected vocabulary.
class capacity_error : public error {
public:
  capacity_error(const std::string& msg, std::uint64_t max_feasible)
      : error(msg), max_feasible_(max_feasible) {}

  std::uint64_t max_feasible() const { return max_feasible_; }

private:
  std::uint64_t max_feasible_;
};

// Decoded byte stream is not valid UTF-8 (strict mode).
class decode_error : public error {
public:
  using error::error;
};

// Matrix dimensions do not line up.
class shape_error : public error {
public:
  using error::error;
};

// Operation undefined on the given values (e.g. empty matrix).
class domain_error : public error {
public:
  using error::error;
};

// Constituent embeddings cancel to a zero mean vector.
class degenerate_error : public error {
public:
  using error::error;
};

// File could not be opened or read.
class io_error : public error {
public:
  using error::error;
};

}  // namespace medtpe
