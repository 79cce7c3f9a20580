#include "fppformer/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fppformer {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

bool wants_grad(const Node& n) { return n.requires_grad; }

bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

// Extents before, at and after `axis`.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Below this many multiply-adds a plain loop beats Eigen's blocked GEMM.
constexpr std::size_t kSmallGemm = 4096;

// c[m,n] = a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  if (m * k * n > kSmallGemm) {
    MatMap(c, m, n).noalias() = ConstMatMap(a, m, k) * ConstMatMap(b, k, n);
    return;
  }
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * b[p * n + j];
    }
}

// c[m,k] += g[m,n] * b[k,n]^T
void gemm_nt_acc(const double* g, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t k) {
  if (m * k * n > kSmallGemm) {
    MatMap(c, m, k).noalias() += ConstMatMap(g, m, n) * ConstMatMap(b, k, n).transpose();
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
      c[i * k + p] += acc;
    }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_tn_acc(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  if (m * k * n > kSmallGemm) {
    MatMap(c, k, n).noalias() += ConstMatMap(a, m, k).transpose() * ConstMatMap(g, m, n);
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) c[p * n + j] += av * g[i * n + j];
    }
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const bool same = a.shape() == b.shape();
  if (!same && !is_suffix(a.shape(), b.shape())) {
    throw ShapeError(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are not compatible");
  }
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t n = ad.size();
  const std::size_t m = bd.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = bd[i % m];
    switch (kind) {
      case BinaryKind::Add: out[i] = ad[i] + bv; break;
      case BinaryKind::Sub: out[i] = ad[i] - bv; break;
      case BinaryKind::Mul: out[i] = ad[i] * bv; break;
    }
  }
  return detail::make_result(a.shape(), std::move(out), {a, b}, [kind, n, m](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    if (wants_grad(pa)) {
      auto& ga = pa.grad_buffer();
      if (kind == BinaryKind::Mul) {
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb.data[i % m];
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
    }
    if (wants_grad(pb)) {
      auto& gb = pb.grad_buffer();
      switch (kind) {
        case BinaryKind::Add:
          for (std::size_t i = 0; i < n; ++i) gb[i % m] += g[i];
          break;
        case BinaryKind::Sub:
          for (std::size_t i = 0; i < n; ++i) gb[i % m] -= g[i];
          break;
        case BinaryKind::Mul:
          for (std::size_t i = 0; i < n; ++i) gb[i % m] += g[i] * pa.data[i];
          break;
      }
    }
  });
}

template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = f(ad[i]);
  return detail::make_result(a.shape(), std::move(out), {a}, [df](Node& self) {
    Node& p = *self.parents[0];
    auto& gp = p.grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i] * df(p.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  // Subgradient 0 at the kink.
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return detail::make_result(Shape{1}, {s}, {a}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    const double g = self.grad[0];
    for (auto& v : gp) v += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return detail::make_result(std::move(shape), a.to_vector(), {a}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& a) { return reshape(a, Shape{a.numel()}); }

Tensor expand_leading(const Tensor& a, const Shape& lead) {
  if (lead.empty()) return a;
  Shape out_shape = lead;
  out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end());
  const std::size_t copies = shape_numel(lead);
  const std::size_t n = a.numel();
  std::vector<double> out(copies * n);
  const auto ad = a.data();
  for (std::size_t c = 0; c < copies; ++c) std::copy(ad.begin(), ad.end(), out.begin() + c * n);
  return detail::make_result(std::move(out_shape), std::move(out), {a}, [copies, n](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < copies; ++c)
      for (std::size_t i = 0; i < n; ++i) gp[i] += self.grad[c * n + i];
  });
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose_last2: rank < 2 for " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  const std::size_t r = out_shape.size();
  const std::size_t rows = out_shape[r - 2];
  const std::size_t cols = out_shape[r - 1];
  std::swap(out_shape[r - 2], out_shape[r - 1]);
  const std::size_t batch = a.numel() / (rows * cols);
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[off + j * rows + i] = ad[off + i * cols + j];
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a},
                             [batch, rows, cols](Node& self) {
                               auto& gp = self.parents[0]->grad_buffer();
                               for (std::size_t b = 0; b < batch; ++b) {
                                 const std::size_t off = b * rows * cols;
                                 for (std::size_t i = 0; i < rows; ++i)
                                   for (std::size_t j = 0; j < cols; ++j)
                                     gp[off + i * cols + j] += self.grad[off + j * rows + i];
                               }
                             });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto fail = [&] {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  };
  if (a.rank() < 2 || b.rank() < 2) fail();
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t n = bs.back();
  if (bs[bs.size() - 2] != k) fail();

  Shape out_shape(as.begin(), as.end() - 1);
  out_shape.push_back(n);

  if (bs.size() == 2) {
    // Shared right operand: one GEMM over the stacked rows of `a`.
    const std::size_t rows = a.numel() / k;
    std::vector<double> out(rows * n);
    MatMap(out.data(), rows, n).noalias() =
        ConstMatMap(a.data().data(), rows, k) * ConstMatMap(b.data().data(), k, n);
    return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                               [rows, k, n](Node& self) {
                                 Node& pa = *self.parents[0];
                                 Node& pb = *self.parents[1];
                                 ConstMatMap g(self.grad.data(), rows, n);
                                 if (wants_grad(pa)) {
                                   MatMap(pa.grad_buffer().data(), rows, k).noalias() +=
                                       g * ConstMatMap(pb.data.data(), k, n).transpose();
                                 }
                                 if (wants_grad(pb)) {
                                   MatMap(pb.grad_buffer().data(), k, n).noalias() +=
                                       ConstMatMap(pa.data.data(), rows, k).transpose() * g;
                                 }
                               });
  }

  if (as.size() != bs.size() || !std::equal(as.begin(), as.end() - 2, bs.begin())) fail();
  const std::size_t batch = a.numel() / (m * k);
  std::vector<double> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    gemm_nn(a.data().data() + i * m * k, b.data().data() + i * k * n, out.data() + i * m * n, m, k,
            n);
  }
  return detail::make_result(
      std::move(out_shape), std::move(out), {a, b}, [batch, m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t i = 0; i < batch; ++i) {
          const double* g = self.grad.data() + i * m * n;
          if (wants_grad(pa)) {
            gemm_nt_acc(g, pb.data.data() + i * k * n, pa.grad_buffer().data() + i * m * k, m, n, k);
          }
          if (wants_grad(pb)) {
            gemm_tn_acc(pa.data.data() + i * m * k, g, pb.grad_buffer().data() + i * k * n, m, k, n);
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t fin = weight.dim(0);
  const std::size_t fout = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != fout)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t rows = x.numel() / fin;
  Shape out_shape = x.shape();
  out_shape.back() = fout;
  std::vector<double> out(rows * fout);
  gemm_nn(x.data().data(), weight.data().data(), out.data(), rows, fin, fout);
  if (bias.defined()) {
    const auto bd = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < fout; ++j) out[r * fout + j] += bd[j];
  }
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return detail::make_result(
      std::move(out_shape), std::move(out), std::move(parents), [rows, fin, fout](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        const double* g = self.grad.data();
        if (wants_grad(px)) gemm_nt_acc(g, pw.data.data(), px.grad_buffer().data(), rows, fout, fin);
        if (wants_grad(pw)) gemm_tn_acc(px.data.data(), g, pw.grad_buffer().data(), rows, fin, fout);
        if (self.parents.size() > 2 && wants_grad(*self.parents[2])) {
          auto& gb = self.parents[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < fout; ++j) gb[j] += g[r * fout + j];
        }
      });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      if (mx == -std::numeric_limits<double>::infinity()) {
        for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = 0.0;
        continue;
      }
      double total = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t idx = base + j * s.inner;
          gp[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const AxisSplit s = split_axis(x.shape(), axis, "layer_norm");
  if (gain.numel() != s.n || bias.numel() != s.n) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " do not match axis extent " + std::to_string(s.n));
  }
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.size());
  // xhat and 1/std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(xd.size());
  auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
  const double nn = static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mu = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) mu += xd[base + j * s.inner];
      mu /= nn;
      double var = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double d = xd[base + j * s.inner] - mu;
        var += d * d;
      }
      var /= nn;
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + in] = is;
      for (std::size_t j = 0; j < s.n; ++j) {
        const std::size_t idx = base + j * s.inner;
        const double h = (xd[idx] - mu) * is;
        (*xhat)[idx] = h;
        out[idx] = h * gd[j] + bd[j];
      }
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gain, bias}, [s, xhat, inv_std, nn](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const auto& g = self.grad;
        const auto& h = *xhat;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.n * s.inner + in;
            if (wants_grad(pg) || wants_grad(pb)) {
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t idx = base + j * s.inner;
                if (wants_grad(pg)) pg.grad_buffer()[j] += g[idx] * h[idx];
                if (wants_grad(pb)) pb.grad_buffer()[j] += g[idx];
              }
            }
            if (wants_grad(px)) {
              double sum_d = 0.0, sum_dh = 0.0;
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t idx = base + j * s.inner;
                const double d = g[idx] * pg.data[j];
                sum_d += d;
                sum_dh += d * h[idx];
              }
              const double is = (*inv_std)[o * s.inner + in];
              auto& gx = px.grad_buffer();
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t idx = base + j * s.inner;
                const double d = g[idx] * pg.data[j];
                gx[idx] += is / nn * (nn * d - sum_d - h[idx] * sum_dh);
              }
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw ConfigError("dropout: training mode needs an rng");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  const auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = u(*rng) < rate ? 0.0 : keep_scale;
    out[i] = xd[i] * (*mask)[i];
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [mask](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor mask_diagonal(const Tensor& scores) {
  if (scores.rank() < 2 || scores.shape().back() != scores.shape()[scores.rank() - 2]) {
    throw ShapeError("mask_diagonal: trailing matrices must be square, got " +
                     shape_str(scores.shape()));
  }
  const std::size_t t = scores.shape().back();
  const std::size_t batch = scores.numel() / (t * t);
  std::vector<double> out = scores.to_vector();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < t; ++i) out[b * t * t + i * t + i] += kMaskSentinel;
  return detail::make_result(scores.shape(), std::move(out), {scores}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

}  // namespace fppformer
