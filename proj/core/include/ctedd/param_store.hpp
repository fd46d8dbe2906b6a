#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctedd/mat.hpp"

namespace ctedd {

class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamEntry {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
};

// Named parameters of one network, kept in insertion order, each with its
// gradient accumulator and Adam moment buffers.
class ParamStore {
 public:
  void add(std::string name, Mat value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  Mat& value(const std::string& name) { return entry(name).value; }
  const Mat& value(const std::string& name) const { return entry(name).value; }
  Mat& grad(const std::string& name) { return entry(name).grad; }
  const Mat& grad(const std::string& name) const { return entry(name).grad; }

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t entry_count() const { return entries_.size(); }
  std::size_t parameter_count() const;

  std::uint64_t step_count() const { return step_count_; }
  void increment_step() { ++step_count_; }

  void zero_grad();
  double grad_norm() const;
  void scale_grads(double factor);
  // Rescales all gradients so their joint L2 norm does not exceed max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  bool same_structure(const ParamStore& other) const;
  // Copies values only; moments, grads and step count are left alone.
  void copy_values_from(const ParamStore& other);

  // Values-only equality, used for snapshot comparisons.
  bool values_equal(const ParamStore& other) const;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_count_ = 0;
};

// `.net` checkpoint: magic "CTEDDNET", u32 version, u32 entry count, then per
// entry u32 name length, UTF-8 name, u32 rows, u32 cols, little-endian f64
// values in row-major order.
inline constexpr std::uint32_t kNetFormatVersion = 1;

void write_params(std::ostream& out, const ParamStore& params);
ParamStore read_params(std::istream& in);
void save_params(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

namespace binary_io {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in, std::uint32_t max_length = 1u << 16);
}  // namespace binary_io

}  // namespace ctedd
