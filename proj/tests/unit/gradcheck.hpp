#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "loglens/ops.hpp"
#include "loglens/rng.hpp"

namespace loglens::testing {

/// Central finite differences against the tape for every entry of `leaves`.
/// Returns the largest |a - n| / max(|a|, |n|, 1e-5).
inline double max_relative_error(const std::function<Tensor()>& loss, const std::vector<Tensor>& leaves,
                                 double eps = 1e-6) {
  for (auto t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss().backward();
  double worst = 0.0;
  for (auto t : leaves) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + eps;
      const double up = loss().item();
      data[i] = keep - eps;
      const double down = loss().item();
      data[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double rel = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-5});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

/// A fixed random projection of `y` to a scalar, so every output entry gets
/// a distinct upstream gradient.
inline Tensor project(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace loglens::testing
