#include "bnnswarm/param_vector.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <string>

#include "bnnswarm/errors.hpp"

namespace bnnswarm {

void ParamVector::set_zero() {
  std::fill(mu.begin(), mu.end(), 0.0);
  std::fill(rho.begin(), rho.end(), 0.0);
}

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset > in.size() || in.size() - offset < 4) throw DecodeError("truncated u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset > in.size() || in.size() - offset < 8) throw DecodeError("truncated f64");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace le

void serialize_into(const ParamVector& params, std::vector<std::uint8_t>& out) {
  out.reserve(out.size() + 8 + 8 * params.size());
  le::put_u32(out, static_cast<std::uint32_t>(params.mu.size()));
  le::put_u32(out, static_cast<std::uint32_t>(params.rho.size()));
  for (double v : params.mu) le::put_f64(out, v);
  for (double v : params.rho) le::put_f64(out, v);
}

std::vector<std::uint8_t> serialize(const ParamVector& params) {
  std::vector<std::uint8_t> out;
  serialize_into(params, out);
  return out;
}

ParamVector deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  const std::uint64_t mu_count = le::get_u32(bytes, offset);
  const std::uint64_t rho_count = le::get_u32(bytes, offset + 4);
  offset += 8;
  const std::uint64_t need = (mu_count + rho_count) * 8;
  if (bytes.size() - offset < need) throw DecodeError("parameter payload shorter than its counts");
  ParamVector p(mu_count, rho_count);
  for (auto& v : p.mu) {
    v = le::get_f64(bytes, offset);
    offset += 8;
  }
  for (auto& v : p.rho) {
    v = le::get_f64(bytes, offset);
    offset += 8;
  }
  return p;
}

ParamVector deserialize(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  auto p = deserialize(bytes, offset);
  if (offset != bytes.size()) throw DecodeError("trailing bytes after parameter vector");
  return p;
}

void write_params_file(const ParamVector& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  const auto bytes = serialize(params);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

ParamVector read_params_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace bnnswarm
