#include "loglens/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "loglens/errors.hpp"

namespace loglens {

using detail::make_result;
using detail::Node;

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const MatR>;
using MutMap = Eigen::Map<MatR>;

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
std::span<double> pgrad(Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }
const std::vector<double>& pvalue(const Node& self, std::size_t i) { return self.parents[i]->value; }

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a vector or matrix, got " + shape_string(t.shape()));
  }
}

bool single(const Tensor& t) { return t.size() == 1; }

enum class Broadcast { none, scalar_a, scalar_b };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (single(a)) return Broadcast::scalar_a;
  if (single(b)) return Broadcast::scalar_b;
  shape_mismatch(op, a, b);
}

// Accumulates g (shaped like the output) into parent i, summing when the
// parent was broadcast from a single value.
void accumulate(Node& self, std::size_t i, std::span<const double> g, bool broadcast) {
  auto dst = pgrad(self, i);
  if (broadcast) {
    double s = 0.0;
    for (double v : g) s += v;
    dst[0] += s;
  } else {
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdy_from_xy) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [dfdy_from_xy](Node& self) {
    const auto& xv = pvalue(self, 0);
    auto dx = pgrad(self, 0);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * dfdy_from_xy(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  if (b.rank() != 2) throw DimensionError("matmul: right operand must be a matrix, got " + shape_string(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_mismatch("matmul", a, b);

  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMap g(self.grad.data(), m, n);
    if (wants(self, 0)) {
      MutMap(pgrad(self, 0).data(), m, k).noalias() += g * ConstMap(pvalue(self, 1).data(), k, n).transpose();
    }
    if (wants(self, 1)) {
      MutMap(pgrad(self, 1).data(), k, n).noalias() += ConstMap(pvalue(self, 0).data(), m, k).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("add", a, b);
  const Tensor& big = kind == Broadcast::scalar_a ? b : a;
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[kind == Broadcast::scalar_a ? 0 : i] + bv[kind == Broadcast::scalar_b ? 0 : i];
  }
  return make_result(big.shape(), std::move(out), {a, b}, [kind](Node& self) {
    if (wants(self, 0)) accumulate(self, 0, self.grad, kind == Broadcast::scalar_a);
    if (wants(self, 1)) accumulate(self, 1, self.grad, kind == Broadcast::scalar_b);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("mul", a, b);
  const Tensor& big = kind == Broadcast::scalar_a ? b : a;
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[kind == Broadcast::scalar_a ? 0 : i] * bv[kind == Broadcast::scalar_b ? 0 : i];
  }
  return make_result(big.shape(), std::move(out), {a, b}, [kind](Node& self) {
    const auto& av = pvalue(self, 0);
    const auto& bv = pvalue(self, 1);
    std::vector<double> g(self.grad.size());
    if (wants(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * bv[kind == Broadcast::scalar_b ? 0 : i];
      accumulate(self, 0, g, kind == Broadcast::scalar_a);
    }
    if (wants(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * av[kind == Broadcast::scalar_a ? 0 : i];
      accumulate(self, 1, g, kind == Broadcast::scalar_b);
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor elementwise(Elementwise op, std::span<const Tensor> args) {
  const std::size_t arity = (op == Elementwise::add || op == Elementwise::mul) ? 2 : 1;
  if (args.size() != arity) {
    throw ConfigError("elementwise: expected " + std::to_string(arity) + " operands, got " +
                      std::to_string(args.size()));
  }
  switch (op) {
    case Elementwise::add: return add(args[0], args[1]);
    case Elementwise::mul: return mul(args[0], args[1]);
    case Elementwise::tanh: return tanh(args[0]);
    case Elementwise::sigmoid: return sigmoid(args[0]);
    case Elementwise::relu: return relu(args[0]);
  }
  throw ConfigError("elementwise: unknown op");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix("add_bias", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) shape_mismatch("add_bias", x, bias);
  const auto xv = x.data(), bv = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    if (wants(self, 0)) {
      auto dx = pgrad(self, 0);
      for (std::size_t i = 0; i < m * n; ++i) dx[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto db = pgrad(self, 1);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul_rows(const Tensor& weights, const Tensor& x) {
  require_matrix("mul_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (weights.size() != m) shape_mismatch("mul_rows", weights, x);
  const auto wv = weights.data(), xv = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = wv[i] * xv[i * n + j];
  return make_result(x.shape(), std::move(out), {weights, x}, [m, n](Node& self) {
    const auto& wv = pvalue(self, 0);
    const auto& xv = pvalue(self, 1);
    if (wants(self, 0)) {
      auto dw = pgrad(self, 0);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += self.grad[i * n + j] * xv[i * n + j];
        dw[i] += s;
      }
    }
    if (wants(self, 1)) {
      auto dx = pgrad(self, 1);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += self.grad[i * n + j] * wv[i];
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  if (x.rank() > 2) throw DimensionError("softmax: rank > 2 not supported, got " + shape_string(x.shape()));
  if (x.size() == 0) throw DimensionError("softmax: empty input");
  std::size_t outer = 1, n = x.size(), inner = 1;
  if (x.rank() == 2) {
    const int ax = axis < 0 ? 1 : axis;
    if (ax == 1) {
      outer = x.rows();
      n = x.cols();
    } else if (ax == 0) {
      n = x.rows();
      inner = x.cols();
    } else {
      throw DimensionError("softmax: axis out of range");
    }
  }
  const auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        out[base + j * inner] = std::exp(xv[base + j * inner] - mx);
        z += out[base + j * inner];
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [outer, n, inner](Node& self) {
    auto dx = pgrad(self, 0);
    const auto& y = self.value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          dx[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_matrix("cross_entropy", logits);
  const std::size_t b = logits.rows(), n = logits.cols();
  if (targets.size() != b) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(b) + " rows");
  }
  const auto lv = logits.data();
  auto probs = std::make_shared<std::vector<double>>(b * n);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (tg[i] >= n) {
      throw IndexError("cross_entropy: target " + std::to_string(tg[i]) + " outside [0, " + std::to_string(n) + ")");
    }
    const double* row = &lv[i * n];
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) (*probs)[i * n + j] = std::exp(row[j] - log_z);
    loss += log_z - row[tg[i]];
  }
  loss /= static_cast<double>(b);
  return make_result({}, {loss}, {logits}, [probs, tg = std::move(tg), b, n](Node& self) {
    auto dx = pgrad(self, 0);
    const double g = self.grad[0] / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += g * (*probs)[i * n + j];
      dx[i * n + tg[i]] -= g;
    }
  });
}

Tensor mse(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) shape_mismatch("mse", x, y);
  const auto xv = x.data(), yv = y.data();
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (xv[i] - yv[i]) * (xv[i] - yv[i]);
  return make_result({}, {s / static_cast<double>(n)}, {x, y}, [n](Node& self) {
    const auto& xv = pvalue(self, 0);
    const auto& yv = pvalue(self, 1);
    const double g = 2.0 * self.grad[0] / static_cast<double>(n);
    if (wants(self, 0)) {
      auto dx = pgrad(self, 0);
      for (std::size_t i = 0; i < n; ++i) dx[i] += g * (xv[i] - yv[i]);
    }
    if (wants(self, 1)) {
      auto dy = pgrad(self, 1);
      for (std::size_t i = 0; i < n; ++i) dy[i] -= g * (xv[i] - yv[i]);
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding_lookup: table must be a matrix, got " + shape_string(table.shape()));
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  const auto tv = table.data();
  std::vector<double> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(idx[r]) + " outside [0, " + std::to_string(v) + ")");
    }
    std::copy_n(&tv[idx[r] * d], d, &out[r * d]);
  }
  const std::size_t rows = idx.size();
  return make_result({rows, d}, std::move(out), {table}, [idx = std::move(idx), d](Node& self) {
    auto dt = pgrad(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) dt[idx[r] * d + j] += self.grad[r * d + j];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s}, {x}, [](Node& self) {
    auto dx = pgrad(self, 0);
    for (auto& v : dx) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto dx = pgrad(self, 0);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != m) shape_mismatch("concat_cols", parts[0], p);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].data();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&pv[i * widths[k]], widths[k], &out[i * total + offset]);
    offset += widths[k];
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({m, total}, std::move(out), std::move(parents), [m, total, widths](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (wants(self, k)) {
        auto dp = pgrad(self, k);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) dp[i * widths[k] + j] += self.grad[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_matrix("slice_cols", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (start + count > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(x.shape()));
  }
  const auto xv = x.data();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&xv[i * n + start], count, &out[i * count]);
  Shape shape = x.rank() == 1 ? Shape{count} : Shape{m, count};
  return make_result(std::move(shape), std::move(out), {x}, [m, n, start, count](Node& self) {
    auto dx = pgrad(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) dx[i * n + start + j] += self.grad[i * count + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != n) shape_mismatch("concat_rows", parts[0], p);
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.size());
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({m, n}, std::move(out), std::move(parents), [sizes](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (wants(self, k)) {
        auto dp = pgrad(self, k);
        for (std::size_t i = 0; i < sizes[k]; ++i) dp[i] += self.grad[offset + i];
      }
      offset += sizes[k];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require_matrix("slice_rows", x);
  const std::size_t n = x.cols();
  if (start + count > x.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + start * n, x.data().begin() + (start + count) * n);
  return make_result({count, n}, std::move(out), {x}, [start, n](Node& self) {
    auto dx = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[start * n + i] += self.grad[i];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix("layer_norm", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n) shape_mismatch("layer_norm", x, gain);
  if (bias.size() != n) shape_mismatch("layer_norm", x, bias);
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[i * n + j] - mu) * inv;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [m, n, xhat, inv_std](Node& self) {
    const auto& gv = pvalue(self, 1);
    const auto& g = self.grad;
    if (wants(self, 0)) {
      auto dx = pgrad(self, 0);
      std::vector<double> dh(n);
      for (std::size_t i = 0; i < m; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dh[j] = g[i * n + j] * gv[j];
          s1 += dh[j];
          s2 += dh[j] * (*xhat)[i * n + j];
        }
        const double k = (*inv_std)[i] / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          dx[i * n + j] += k * (static_cast<double>(n) * dh[j] - s1 - (*xhat)[i * n + j] * s2);
        }
      }
    }
    if (wants(self, 1)) {
      auto dg = pgrad(self, 1);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dg[j] += g[i * n + j] * (*xhat)[i * n + j];
    }
    if (wants(self, 2)) {
      auto db = pgrad(self, 2);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
    }
  });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t batch,
                            std::size_t seq_len, std::size_t heads, std::vector<double>* weights_out) {
  require_matrix("attention", q);
  if (k.shape() != q.shape()) shape_mismatch("attention", q, k);
  if (v.shape() != q.shape()) shape_mismatch("attention", q, v);
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (q.rows() != batch * seq_len) {
    throw DimensionError("attention: " + std::to_string(q.rows()) + " rows for batch " + std::to_string(batch) +
                         " x length " + std::to_string(seq_len));
  }
  const std::size_t dh = d / heads, L = seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto qv = q.data(), kv = k.data(), vv = v.data();
  auto probs = std::make_shared<std::vector<double>>(batch * heads * L * L);
  std::vector<double> out(batch * L * d, 0.0);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* P = &(*probs)[((b * heads) + h) * L * L];
      for (std::size_t i = 0; i < L; ++i) {
        const double* qi = &qv[(b * L + i) * d + h * dh];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
          const double* kj = &kv[(b * L + j) * d + h * dh];
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          P[i * L + j] = s * inv_sqrt;
          mx = std::max(mx, P[i * L + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          P[i * L + j] = std::exp(P[i * L + j] - mx);
          z += P[i * L + j];
        }
        double* oi = &out[(b * L + i) * d + h * dh];
        for (std::size_t j = 0; j < L; ++j) {
          P[i * L + j] /= z;
          const double* vj = &vv[(b * L + j) * d + h * dh];
          for (std::size_t c = 0; c < dh; ++c) oi[c] += P[i * L + j] * vj[c];
        }
      }
    }
  }
  if (weights_out) *weights_out = *probs;

  return make_result(q.shape(), std::move(out), {q, k, v}, [probs, batch, heads, L, d, dh, inv_sqrt](Node& self) {
    const auto& qv = pvalue(self, 0);
    const auto& kv = pvalue(self, 1);
    const auto& vv = pvalue(self, 2);
    const bool need_q = wants(self, 0), need_k = wants(self, 1), need_v = wants(self, 2);
    std::span<double> dq, dk, dv;
    if (need_q) dq = pgrad(self, 0);
    if (need_k) dk = pgrad(self, 1);
    if (need_v) dv = pgrad(self, 2);
    std::vector<double> dp(L), ds(L);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        const double* P = &(*probs)[((b * heads) + h) * L * L];
        for (std::size_t i = 0; i < L; ++i) {
          const double* go = &self.grad[(b * L + i) * d + h * dh];
          double dot = 0.0;
          for (std::size_t j = 0; j < L; ++j) {
            const double* vj = &vv[(b * L + j) * d + h * dh];
            double s = 0.0;
            for (std::size_t c = 0; c < dh; ++c) s += go[c] * vj[c];
            dp[j] = s;
            dot += s * P[i * L + j];
            if (need_v) {
              double* dvj = &dv[(b * L + j) * d + h * dh];
              for (std::size_t c = 0; c < dh; ++c) dvj[c] += P[i * L + j] * go[c];
            }
          }
          for (std::size_t j = 0; j < L; ++j) ds[j] = P[i * L + j] * (dp[j] - dot) * inv_sqrt;
          const double* qi = &qv[(b * L + i) * d + h * dh];
          for (std::size_t j = 0; j < L; ++j) {
            const double* kj = &kv[(b * L + j) * d + h * dh];
            if (need_q) {
              double* dqi = &dq[(b * L + i) * d + h * dh];
              for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds[j] * kj[c];
            }
            if (need_k) {
              double* dkj = &dk[(b * L + j) * d + h * dh];
              for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds[j] * qi[c];
            }
          }
        }
      }
    }
  });
}

Tensor conv2d(const Tensor& input, const Tensor& filter) {
  if (input.rank() != 2 || filter.rank() != 2) {
    throw DimensionError("conv2d: input " + shape_string(input.shape()) + " and filter " +
                         shape_string(filter.shape()) + " must be matrices");
  }
  const std::size_t h = input.rows(), w = input.cols(), fh = filter.rows(), fw = filter.cols();
  if (fh > h || fw > w) {
    throw DimensionError("conv2d: filter " + shape_string(filter.shape()) + " larger than input " +
                         shape_string(input.shape()));
  }
  const std::size_t oh = h - fh + 1, ow = w - fw + 1;
  const auto iv = input.data(), fv = filter.data();
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < fh; ++a)
        for (std::size_t c = 0; c < fw; ++c) s += iv[(i + a) * w + j + c] * fv[a * fw + c];
      out[i * ow + j] = s;
    }
  return make_result({oh, ow}, std::move(out), {input, filter}, [w, fh, fw, oh, ow](Node& self) {
    const auto& iv = pvalue(self, 0);
    const auto& fv = pvalue(self, 1);
    const bool need_in = wants(self, 0), need_f = wants(self, 1);
    std::span<double> di, df;
    if (need_in) di = pgrad(self, 0);
    if (need_f) df = pgrad(self, 1);
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const double g = self.grad[i * ow + j];
        for (std::size_t a = 0; a < fh; ++a)
          for (std::size_t c = 0; c < fw; ++c) {
            if (need_in) di[(i + a) * w + j + c] += g * fv[a * fw + c];
            if (need_f) df[a * fw + c] += g * iv[(i + a) * w + j + c];
          }
      }
  });
}

std::vector<Tensor> conv2d(const Tensor& input, std::span<const Tensor> filters) {
  std::vector<Tensor> maps;
  maps.reserve(filters.size());
  for (const auto& f : filters) maps.push_back(conv2d(input, f));
  return maps;
}

Tensor unfold_rows(const Tensor& x, std::size_t seq_len, std::size_t height) {
  if (x.rank() != 2) throw DimensionError("unfold_rows: expected a matrix, got " + shape_string(x.shape()));
  if (seq_len == 0 || x.rows() % seq_len != 0) {
    throw DimensionError("unfold_rows: " + std::to_string(x.rows()) + " rows are not a multiple of length " +
                         std::to_string(seq_len));
  }
  if (height == 0 || height > seq_len) {
    throw DimensionError("unfold_rows: window height " + std::to_string(height) + " exceeds length " +
                         std::to_string(seq_len));
  }
  const std::size_t e = x.cols(), batch = x.rows() / seq_len, positions = seq_len - height + 1;
  const std::size_t width = height * e;
  const auto xv = x.data();
  std::vector<double> out(batch * positions * width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      std::copy_n(&xv[(b * seq_len + p) * e], width, &out[(b * positions + p) * width]);
  return make_result({batch * positions, width}, std::move(out), {x}, [batch, positions, width, seq_len, e](Node& self) {
    auto dx = pgrad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t p = 0; p < positions; ++p) {
        const double* g = &self.grad[(b * positions + p) * width];
        double* d = &dx[(b * seq_len + p) * e];
        for (std::size_t c = 0; c < width; ++c) d[c] += g[c];
      }
  });
}

Tensor segment_max(const Tensor& x, std::size_t group) {
  require_matrix("segment_max", x);
  if (group == 0 || x.rows() % group != 0) {
    throw DimensionError("segment_max: " + std::to_string(x.rows()) + " rows are not a multiple of group " +
                         std::to_string(group));
  }
  const std::size_t n = x.cols(), segments = x.rows() / group;
  const auto xv = x.data();
  std::vector<double> out(segments * n);
  std::vector<std::size_t> argmax(segments * n);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = s * group;
      for (std::size_t r = s * group + 1; r < (s + 1) * group; ++r)
        if (xv[r * n + j] > xv[best * n + j]) best = r;
      argmax[s * n + j] = best;
      out[s * n + j] = xv[best * n + j];
    }
  return make_result({segments, n}, std::move(out), {x}, [argmax = std::move(argmax), n](Node& self) {
    auto dx = pgrad(self, 0);
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i] * n + i % n] += self.grad[i];
  });
}

}  // namespace loglens
