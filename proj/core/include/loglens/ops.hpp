#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loglens/tensor.hpp"

namespace loglens {

// Differentiable operations. Matrices are rank-2 row-major tensors; a rank-1
// tensor of length n is accepted wherever a 1 x n row is expected. Every op
// throws DimensionError when operand shapes do not agree.

Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise ops. Operands must share a shape, or one of them holds a single value.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

enum class Elementwise { add, mul, tanh, sigmoid, relu };
/// Dispatches on `op`. add and mul take two arguments, the others one;
/// any other count is a ConfigError.
Tensor elementwise(Elementwise op, std::span<const Tensor> args);

/// x[m x n] + bias[n], bias broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// weights[m x 1] (or [m]) times each row of x[m x n].
Tensor mul_rows(const Tensor& weights, const Tensor& x);

/// Max-subtracted softmax. axis 0 or 1 for matrices; a vector uses its only axis.
Tensor softmax(const Tensor& x, int axis = -1);
/// Mean negative log-likelihood of targets under row-wise softmax of logits[b x n].
/// Throws IndexError for targets outside [0, n).
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
/// Mean squared difference.
Tensor mse(const Tensor& x, const Tensor& y);

/// Gathers rows of table[V x d]; gradients scatter-add back into the table.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);

/// Row-wise layer normalization with learned gain and bias (both [n]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Scaled dot-product attention over `batch` stacked sequences of length
/// `seq_len`: q, k and v are [batch*seq_len x d], split into `heads` column
/// blocks. When `weights_out` is given it receives the attention weights laid
/// out as [batch][head][query][key].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t batch,
                            std::size_t seq_len, std::size_t heads,
                            std::vector<double>* weights_out = nullptr);

/// Valid 2-D cross-correlation of input[h x w] with filter[fh x fw].
Tensor conv2d(const Tensor& input, const Tensor& filter);
std::vector<Tensor> conv2d(const Tensor& input, std::span<const Tensor> filters);

/// For `x` holding `batch` stacked [seq_len x e] blocks, returns every window
/// of `height` consecutive rows flattened into one row:
/// [batch*(seq_len-height+1) x height*e]. Multiplying the result by a
/// [height*e x F] matrix applies F full-width convolution filters at once.
Tensor unfold_rows(const Tensor& x, std::size_t seq_len, std::size_t height);
/// Column-wise max over each consecutive group of `group` rows.
Tensor segment_max(const Tensor& x, std::size_t group);

}  // namespace loglens
