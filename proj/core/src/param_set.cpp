#include "loglens/param_set.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "loglens/errors.hpp"

namespace loglens {

namespace {

constexpr char kMagic[5] = {'L', 'L', 'N', 'S', '1'};
constexpr std::uint64_t kMaxName = 1 << 16;
constexpr std::uint64_t kMaxRank = 8;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("param container: truncated integer");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

Tensor ParamSet::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  entries_.emplace_back(name, tensor);
  return tensor;
}

Tensor ParamSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = rng_.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(data), true));
}

Tensor ParamSet::add_constant(const std::string& name, Shape shape, double value, bool trainable) {
  return add(name, Tensor::full(std::move(shape), value, trainable));
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParamSet::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  put_u64(out, entries_.size());
  for (const auto& [name, t] : entries_) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_f64(out, v);
  }
  if (!out) throw IoError("param container: write failed");
}

ParamSet ParamSet::load(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("param container: bad magic (expected LLNS1)");
  }
  ParamSet params;
  const std::uint64_t count = get_u64(in);
  for (std::uint64_t p = 0; p < count; ++p) {
    const std::uint64_t len = get_u64(in);
    if (len > kMaxName) throw FormatError("param container: implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw FormatError("param container: truncated name");
    const std::uint64_t rank = get_u64(in);
    if (rank > kMaxRank) throw FormatError("param container: implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in);
    std::vector<double> data(shape_size(shape));
    for (auto& v : data) v = get_f64(in);
    params.add(name, Tensor::from(std::move(shape), std::move(data), true));
  }
  return params;
}

void ParamSet::save_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save(out);
}

ParamSet ParamSet::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return load(in);
}

bool ParamSet::identical(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, a] = entries_[i];
    const auto& [nb, b] = other.entries_[i];
    if (na != nb || a.shape() != b.shape()) return false;
    if (std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace loglens
