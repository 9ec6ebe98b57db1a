#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "loglens/rng.hpp"
#include "loglens/tensor.hpp"

namespace loglens {

/// Named, ordered collection of model parameters.
///
/// Parameters are drawn at registration time from a generator seeded with
/// `seed`, so registering the same architecture in the same order with the
/// same seed reproduces the parameters bit for bit.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  /// Trainable parameter drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in);
  Tensor add_constant(const std::string& name, Shape shape, double value, bool trainable = true);
  Tensor add(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  std::uint64_t seed() const { return seed_; }
  void zero_grad();

  /// Binary container: magic "LLNS1", u64 parameter count, then per parameter
  /// u64 name length, name bytes, u64 rank, u64 dims, f64 data. All integers
  /// and floats little-endian.
  void save(std::ostream& out) const;
  static ParamSet load(std::istream& in);
  void save_file(const std::filesystem::path& path) const;
  static ParamSet load_file(const std::filesystem::path& path);

  /// Same names, shapes, and bit-identical values, in the same order.
  bool identical(const ParamSet& other) const;

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace loglens
