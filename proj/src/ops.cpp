#include "hvfa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hvfa/errors.hpp"

namespace hvfa {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const NodePtr& p) { return p->requires_grad; });
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

// Grad buffer of a parent, or nullptr when it does not take gradient.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

// Flat offset of grid cell (i, j) in a [rows x cols x q x ch] block.
struct GridLayout {
  std::size_t rows, cols, q, ch;
  std::size_t cell() const { return q * ch; }
  std::size_t offset(std::size_t i, std::size_t j) const { return (i * cols + j) * cell(); }
};

GridLayout pooled_layout(const Tensor& f, const char* op) {
  require_rank(f, 4, op);
  const auto& s = f.shape();
  if (s[0] % 2 != 0 || s[1] % 2 != 0) {
    throw ShapeError(std::string(op) + ": grid extents must be even, got " + shape_str(s));
  }
  return {s[0], s[1], s[2], s[3]};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    if (auto* ga = grad_of(self, 0)) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
          (*ga)[i * k + p] += acc;
        }
    }
    if (auto* gb = grad_of(self, 1)) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), {a.node()}, [m, n](Node& self) {
    auto* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = grad_of(self, p))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * B[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * A[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * factor;
  return make_result(a.shape(), std::move(out), {a.node()}, [factor](Node& self) {
    auto* g = grad_of(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
  });
}

Tensor tanh(const Tensor& a) {
  const auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A[i]);
  return make_result(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    auto* g = grad_of(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double y = self.data[i];
      (*g)[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t c = x.shape().back();
  if (bias.numel() != c) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match last axis of " +
                         shape_str(x.shape()));
  }
  const auto X = x.data();
  const auto b = bias.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] + b[i % c];
  return make_result(x.shape(), std::move(out), {x.node(), bias.node()}, [c](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i % c] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({1}, {acc}, {a.node()}, [](Node& self) {
    auto* g = grad_of(self, 0);
    for (auto& v : *g) v += self.grad[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  const auto A = a.data();
  return make_result(std::move(shape), std::vector<double>(A.begin(), A.end()), {a.node()},
                     [](Node& self) {
                       auto* g = grad_of(self, 0);
                       for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank(a, 2, "gather_rows");
  const std::size_t n = a.dim(0), c = a.dim(1);
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const auto A = a.data();
  std::vector<double> out(rows.size() * c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(A.begin() + static_cast<std::ptrdiff_t>(rows[r] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({rows.size(), c}, std::move(out), {a.node()},
                     [idx = std::move(idx), c](Node& self) {
                       auto* g = grad_of(self, 0);
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t j = 0; j < c; ++j) (*g)[idx[r] * c + j] += self.grad[r * c + j];
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::vector<NodePtr> parents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw DimensionError("concat_cols: row count mismatch " + shape_str(p.shape()));
    widths.push_back(p.dim(1));
    parents.push_back(p.node());
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto P = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + col + j] = P[i * widths[k] + j];
    col += widths[k];
  }
  return make_result({m, total}, std::move(out), std::move(parents),
                     [m, total, widths = std::move(widths)](Node& self) {
                       std::size_t col = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (auto* g = grad_of(self, k))
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               (*g)[i * widths[k] + j] += self.grad[i * total + col + j];
                         col += widths[k];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].dim(1);
  std::vector<std::size_t> sizes;
  std::vector<NodePtr> parents;
  std::vector<double> out;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) throw DimensionError("concat_rows: column count mismatch " + shape_str(p.shape()));
    sizes.push_back(p.numel());
    parents.push_back(p.node());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t rows = out.size() / c;
  return make_result({rows, c}, std::move(out), std::move(parents),
                     [sizes = std::move(sizes)](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < sizes.size(); ++k) {
                         if (auto* g = grad_of(self, k))
                           for (std::size_t i = 0; i < sizes[k]; ++i) (*g)[i] += self.grad[off + i];
                         off += sizes[k];
                       }
                     });
}

Tensor softmax_lastaxis(const Tensor& x) {
  const std::size_t w = x.shape().back();
  const auto X = x.data();
  const std::size_t rows = X.size() / w;
  std::vector<double> out(X.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = X.data() + r * w;
    double* y = out.data() + r * w;
    const double mx = *std::max_element(in, in + w);
    double z = 0.0;
    for (std::size_t j = 0; j < w; ++j) z += (y[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < w; ++j) y[j] /= z;
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [w, rows](Node& self) {
    auto* g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * w;
      const double* gy = self.grad.data() + r * w;
      double dot = 0.0;
      for (std::size_t j = 0; j < w; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < w; ++j) (*g)[r * w + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm_lastaxis(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t w = x.shape().back();
  if (gamma.numel() != w || beta.numel() != w) {
    throw DimensionError("layer_norm: affine width does not match " + shape_str(x.shape()));
  }
  const auto X = x.data();
  const auto G = gamma.data();
  const auto B = beta.data();
  const std::size_t rows = X.size() / w;
  std::vector<double> out(X.size());
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = X.data() + r * w;
    double mean = 0.0;
    for (std::size_t j = 0; j < w; ++j) mean += in[j];
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t j = 0; j < w; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(w);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < w; ++j) {
      xhat[r * w + j] = (in[j] - mean) * inv_std[r];
      out[r * w + j] = xhat[r * w + j] * G[j] + B[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
      [w, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& G = self.parents[1]->data;
        auto* gx = grad_of(self, 0);
        auto* gg = grad_of(self, 1);
        auto* gb = grad_of(self, 2);
        const double inv_w = 1.0 / static_cast<double>(w);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * w;
          const double* xh = xhat.data() + r * w;
          if (gg)
            for (std::size_t j = 0; j < w; ++j) (*gg)[j] += gy[j] * xh[j];
          if (gb)
            for (std::size_t j = 0; j < w; ++j) (*gb)[j] += gy[j];
          if (gx) {
            // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < w; ++j) {
              const double d = gy[j] * G[j];
              m1 += d;
              m2 += d * xh[j];
            }
            m1 *= inv_w;
            m2 *= inv_w;
            for (std::size_t j = 0; j < w; ++j)
              (*gx)[r * w + j] += inv_std[r] * (gy[j] * G[j] - m1 - xh[j] * m2);
          }
        }
      });
}

Tensor maxpool_grid2x2(const Tensor& f) {
  const GridLayout in = pooled_layout(f, "maxpool_grid2x2");
  const GridLayout out_l{in.rows / 2, in.cols / 2, in.q, in.ch};
  const auto F = f.data();
  std::vector<double> out(shape_numel({out_l.rows, out_l.cols, out_l.q, out_l.ch}));
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t i = 0; i < out_l.rows; ++i)
    for (std::size_t j = 0; j < out_l.cols; ++j)
      for (std::size_t e = 0; e < in.cell(); ++e) {
        std::size_t best = in.offset(2 * i, 2 * j) + e;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t k = in.offset(2 * i + di, 2 * j + dj) + e;
            if (F[k] > F[best]) best = k;
          }
        const std::size_t o = out_l.offset(i, j) + e;
        out[o] = F[best];
        argmax[o] = best;
      }
  return make_result({out_l.rows, out_l.cols, out_l.q, out_l.ch}, std::move(out), {f.node()},
                     [argmax = std::move(argmax)](Node& self) {
                       auto* g = grad_of(self, 0);
                       for (std::size_t o = 0; o < argmax.size(); ++o) (*g)[argmax[o]] += self.grad[o];
                     });
}

Tensor avgpool_grid2x2(const Tensor& f) {
  const GridLayout in = pooled_layout(f, "avgpool_grid2x2");
  const GridLayout out_l{in.rows / 2, in.cols / 2, in.q, in.ch};
  const auto F = f.data();
  std::vector<double> out(shape_numel({out_l.rows, out_l.cols, out_l.q, out_l.ch}));
  for (std::size_t i = 0; i < out_l.rows; ++i)
    for (std::size_t j = 0; j < out_l.cols; ++j)
      for (std::size_t e = 0; e < in.cell(); ++e) {
        double acc = 0.0;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) acc += F[in.offset(2 * i + di, 2 * j + dj) + e];
        out[out_l.offset(i, j) + e] = 0.25 * acc;
      }
  return make_result({out_l.rows, out_l.cols, out_l.q, out_l.ch}, std::move(out), {f.node()},
                     [in, out_l](Node& self) {
                       auto* g = grad_of(self, 0);
                       for (std::size_t i = 0; i < out_l.rows; ++i)
                         for (std::size_t j = 0; j < out_l.cols; ++j)
                           for (std::size_t e = 0; e < in.cell(); ++e) {
                             const double v = 0.25 * self.grad[out_l.offset(i, j) + e];
                             for (std::size_t di = 0; di < 2; ++di)
                               for (std::size_t dj = 0; dj < 2; ++dj)
                                 (*g)[in.offset(2 * i + di, 2 * j + dj) + e] += v;
                           }
                     });
}

Tensor mse_mean(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_mean");
  const auto A = a.data();
  const auto B = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += (A[i] - B[i]) * (A[i] - B[i]);
  const double n = static_cast<double>(A.size());
  return make_result({1}, {acc / n}, {a.node(), b.node()}, [n](Node& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    const double s = 2.0 * self.grad[0] / n;
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < A.size(); ++i) (*g)[i] += s * (A[i] - B[i]);
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < A.size(); ++i) (*g)[i] -= s * (A[i] - B[i]);
  });
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy_sum");
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != n) {
    throw DimensionError("cross_entropy_sum: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
  }
  const auto L = logits.data();
  std::vector<double> probs(L.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= v) throw DomainError("cross_entropy_sum: target outside vocabulary");
    const double* in = L.data() + r * v;
    const double mx = *std::max_element(in, in + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += (probs[r * v + j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < v; ++j) probs[r * v + j] /= z;
    loss -= (in[targets[r]] - mx) - std::log(z);
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result({1}, {loss}, {logits.node()},
                     [v, probs = std::move(probs), tgt = std::move(tgt)](Node& self) {
                       auto* g = grad_of(self, 0);
                       const double s = self.grad[0];
                       for (std::size_t r = 0; r < tgt.size(); ++r)
                         for (std::size_t j = 0; j < v; ++j)
                           (*g)[r * v + j] += s * (probs[r * v + j] - (j == tgt[r] ? 1.0 : 0.0));
                     });
}

}  // namespace hvfa
