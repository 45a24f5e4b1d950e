#include "stencilforge/manifest.hpp"

#include <bit>
#include <cstdio>

#include "stencilforge/format.hpp"

namespace stencilforge {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t problem_hash(const ProblemSpec& spec) {
  std::string text = "dim " + std::to_string(spec.dimension());
  for (int e : spec.grid().extents) text += ' ' + std::to_string(e);
  text += " step " + spec.grid().step_name + '=' + format_double(spec.grid().step) + '\n';
  for (const auto& c : spec.fields().components) text += "field " + c + '\n';
  for (const auto& [name, value] : spec.parameters()) text += "param " + name + '=' + format_double(value) + '\n';
  const SymbolNames names = spec.names();
  for (const auto& r : spec.regions()) {
    text += "region " + r.name + ' ' + to_string(r.where, spec.dimension()) + '\n';
    for (const auto& v : r.values) {
      text += std::holds_alternative<double>(v) ? format_double(std::get<double>(v)) : std::get<std::string>(v);
      text += '\n';
    }
    for (const auto& e : r.residuals) text += to_string(e, names) + '\n';
  }
  std::uint64_t h = fnv1a64(text);
  for (const auto& g : spec.fields().given) {
    h = fnv1a64(g.name, h);
    for (double v : g.samples) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
    }
  }
  return h;
}

std::string hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command}, {"problem", problem}, {"options", options},
          {"problem_hash", hex(hash)}, {"seed", seed}, {"outputs", outputs}};
}

}  // namespace stencilforge
