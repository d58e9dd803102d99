#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparsestein {

/// Base class of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// diff
struct DomainError : Error { using Error::Error; };
struct UnboundLeaf : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };

// models
struct SingularDeformation : Error { using Error::Error; };
struct ConcentrationOutOfRange : Error { using Error::Error; };
struct NegativeWeight : Error { using Error::Error; };

// sparsify
struct InvalidUniform : Error { using Error::Error; };
struct AllPruned : Error { using Error::Error; };

// inference
struct DegenerateSpectrum : Error { using Error::Error; };

// datagen
struct GentLocking : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };

/// Malformed text input. `line` is 1-based, 0 when unknown.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line(line) {}
  std::size_t line;
};

// metrics
struct ConstantTarget : Error { using Error::Error; };

// pipeline
struct ValidationError : Error {
  ValidationError(const std::string& key, const std::string& what, std::size_t line = 0)
      : Error("invalid '" + key + "'" + (line ? " (line " + std::to_string(line) + ")" : "") +
              ": " + what),
        key(key),
        line(line) {}
  std::string key;
  std::size_t line;
};

}  // namespace sparsestein
