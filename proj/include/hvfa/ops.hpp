#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hvfa/tensor.hpp"

// Differentiable operations. Every op records a backward closure when any
// input requires grad, and the closure accumulates exact analytic gradients.
namespace hvfa {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// 2-D transpose.
Tensor transpose(const Tensor& a);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& a);

// x[..., c] + bias[c]
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);

// Same data, new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);

// Rows of a 2-D tensor picked by index (repeats allowed). Backward scatters.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

// Concatenate 2-D tensors with equal row counts along columns.
Tensor concat_cols(std::span<const Tensor> parts);
// Concatenate 2-D tensors with equal column counts along rows.
Tensor concat_rows(std::span<const Tensor> parts);

// Softmax over the last axis, max-subtracted.
Tensor softmax_lastaxis(const Tensor& x);

// Layer normalization over the last axis with affine gamma/beta of that width.
Tensor layer_norm_lastaxis(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           double eps = 1e-5);

// [2r x 2c x q x ch] -> [r x c x q x ch], max over each 2x2 grid block.
// Ties route gradient to the first cell in row-major scan order.
Tensor maxpool_grid2x2(const Tensor& f);
// Same blocking as maxpool_grid2x2, mean instead of max.
Tensor avgpool_grid2x2(const Tensor& f);

// Mean of squared differences over all elements, shape [1].
Tensor mse_mean(const Tensor& a, const Tensor& b);

// Sum over rows of -log softmax(logits[row])[target[row]], shape [1].
Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace hvfa
