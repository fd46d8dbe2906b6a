#include "ctedd/param_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace ctedd {

namespace {
constexpr char kNetMagic[8] = {'C', 'T', 'E', 'D', 'D', 'N', 'E', 'T'};
}  // namespace

void ParamStore::add(std::string name, Mat value) {
  if (contains(name)) throw StructureError("ParamStore: duplicate parameter '" + name + "'");
  require_finite(value, "ParamStore::add(" + name + ")");
  index_.emplace(name, entries_.size());
  const std::size_t r = value.rows();
  const std::size_t c = value.cols();
  entries_.push_back(ParamEntry{std::move(name), std::move(value), Mat(r, c), Mat(r, c), Mat(r, c)});
}

ParamEntry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw StructureError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StructureError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double total = 0.0;
  for (const auto& e : entries_) total += squared_norm(e.grad);
  return std::sqrt(total);
}

void ParamStore::scale_grads(double factor) {
  for (auto& e : entries_) scale_inplace(e.grad, factor);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) scale_grads(max_norm / norm);
  return norm;
}

bool ParamStore::same_structure(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!entries_[i].value.same_shape(other.entries_[i].value)) return false;
  }
  return true;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (!same_structure(other)) throw StructureError("ParamStore::copy_values_from: structure mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].value = other.entries_[i].value;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (!same_structure(other)) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!(entries_[i].value == other.entries_[i].value)) return false;
  }
  return true;
}

namespace binary_io {

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

namespace {
void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("unexpected end of file");
}
}  // namespace

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  read_exact(in, reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  read_exact(in, reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_string(std::istream& in, std::uint32_t max_length) {
  const std::uint32_t n = read_u32(in);
  if (n > max_length) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

}  // namespace binary_io

void write_params(std::ostream& out, const ParamStore& params) {
  using namespace binary_io;
  out.write(kNetMagic, sizeof(kNetMagic));
  write_u32(out, kNetFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(params.entry_count()));
  for (const auto& e : params.entries()) {
    write_string(out, e.name);
    write_u32(out, static_cast<std::uint32_t>(e.value.rows()));
    write_u32(out, static_cast<std::uint32_t>(e.value.cols()));
    for (double v : e.value.data()) write_f64(out, v);
  }
}

ParamStore read_params(std::istream& in) {
  using namespace binary_io;
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kNetMagic)) {
    throw FormatError("not a CTEDDNET checkpoint");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kNetFormatVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(in);
  ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
      throw FormatError("parameter '" + name + "' is implausibly large");
    }
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = read_f64(in);
    params.add(std::move(name), Mat(rows, cols, std::move(data)));
  }
  return params;
}

void save_params(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_params(out, params);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ParamStore load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_params(in);
}

}  // namespace ctedd
