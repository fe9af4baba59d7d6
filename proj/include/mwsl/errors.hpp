#pragma once

#include <stdexcept>
#include <string>

namespace mwsl {

// Malformed input files (bad JSON, bad CSV, missing fields).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally well-formed input that violates a domain invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mwsl
