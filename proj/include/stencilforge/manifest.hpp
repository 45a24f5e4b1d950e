#pragma once

// Provenance stamped into every output file.

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "stencilforge/problem.hpp"

namespace stencilforge {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hash of everything that defines the discrete problem: grid, fields, given
/// samples, parameters, regions and residuals.
std::uint64_t problem_hash(const ProblemSpec& spec);
std::string hex(std::uint64_t value);

struct RunManifest {
  std::string command;
  std::string problem;                          // builtin name or DSL path
  std::map<std::string, std::string> options;   // builtin and solver settings as given
  std::uint64_t hash = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> outputs;   // artifact name -> file name in the output directory

  nlohmann::json to_json() const;
  /// Single-line JSON, used in field file headers.
  std::string line() const { return to_json().dump(); }
};

}  // namespace stencilforge
