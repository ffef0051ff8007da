#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bnnswarm {

// Flat parameter snapshot of a BNN, split into the mean (mu) section and
// the unconstrained standard-deviation (rho) section. Ordering: layer index
// ascending, weights row-major, then biases. Deterministic layers
// contribute only to the mu section.
struct ParamVector {
  std::vector<double> mu;
  std::vector<double> rho;

  ParamVector() = default;
  ParamVector(std::size_t mu_count, std::size_t rho_count) : mu(mu_count, 0.0), rho(rho_count, 0.0) {}
  ParamVector(std::vector<double> mu_part, std::vector<double> rho_part)
      : mu(std::move(mu_part)), rho(std::move(rho_part)) {}

  std::size_t size() const { return mu.size() + rho.size(); }
  bool same_layout(const ParamVector& other) const {
    return mu.size() == other.mu.size() && rho.size() == other.rho.size();
  }
  void set_zero();

  bool operator==(const ParamVector&) const = default;
};

// Little-endian helpers shared by the parameter and message codecs.
namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset);
double get_f64(std::span<const std::uint8_t> in, std::size_t offset);

}  // namespace le

// [u32 mu_count][u32 rho_count][mu_count f64][rho_count f64], little-endian.
std::vector<std::uint8_t> serialize(const ParamVector& params);
void serialize_into(const ParamVector& params, std::vector<std::uint8_t>& out);

// Parses a serialized vector starting at `offset`; advances `offset` past it.
// Throws DecodeError on truncated input.
ParamVector deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset);
ParamVector deserialize(std::span<const std::uint8_t> bytes);

void write_params_file(const ParamVector& params, const std::string& path);
ParamVector read_params_file(const std::string& path);

}  // namespace bnnswarm
