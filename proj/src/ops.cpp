// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/ops.hpp"

#include <algorithm>
#include <cmath>

namespace gvt::nn {

namespace {

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw NumericsError(std::string(op) + ": " + what);
}

bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), full.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

// Gradient slot of input i, or nullptr when it does not participate.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node* in = self.inputs[i].get();
  return in->requires_grad ? &in->ensure_grad() : nullptr;
}

const std::vector<double>& value_of(Node& self, std::size_t i) { return self.inputs[i]->value; }

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
#pragma omp parallel for schedule(static) if (m * n * k > (1u << 16))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
#pragma omp parallel for schedule(static) if (m * n * k > (1u << 16))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
#pragma omp parallel for schedule(static) if (m * n * k > (1u << 16))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(op, a.shape(), std::move(out), {a}, [df](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& xv = value_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

}  // namespace

double sigmoid_scalar(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

Tensor add(const Tensor& a, const Tensor& b) {
  require(is_suffix(a.shape(), b.shape()), "add", "shape " + shape_str(b.shape()) + " does not broadcast onto " + shape_str(a.shape()));
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t inner = bv.size();
  std::vector<double> out(av.begin(), av.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % inner];
  return make_result("add", a.shape(), std::move(out), {a, b}, [inner](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i % inner] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(is_suffix(a.shape(), b.shape()), "mul", "shape " + shape_str(b.shape()) + " does not broadcast onto " + shape_str(a.shape()));
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t inner = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % inner];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [inner](Node& self) {
    const auto& x = value_of(self, 0);
    const auto& y = value_of(self, 1);
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * y[i % inner];
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i % inner] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul",
          "incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    if (auto* ga = grad_of(self, 0)) gemm_nt(m, k, n, self.grad.data(), value_of(self, 1).data(), ga->data());
    if (auto* gb = grad_of(self, 1)) gemm_tn(k, n, m, value_of(self, 0).data(), self.grad.data(), gb->data());
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(weight.rank() == 2 && x.rank() >= 1 && x.shape().back() == weight.dim(0), "linear",
          "input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  const std::size_t in = weight.dim(0), outd = weight.dim(1);
  const std::size_t rows = x.numel() / in;
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == outd, "linear", "bias length mismatch");
  std::vector<double> out(rows * outd, 0.0);
  if (has_bias) {
    for (std::size_t r = 0; r < rows; ++r) std::copy(bias.data().begin(), bias.data().end(), out.begin() + r * outd);
  }
  gemm_nn(rows, outd, in, x.data().data(), weight.data().data(), out.data());
  Shape shape = x.shape();
  shape.back() = outd;
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result("linear", std::move(shape), std::move(out), std::move(inputs), [rows, in, outd, has_bias](Node& self) {
    if (auto* gx = grad_of(self, 0)) gemm_nt(rows, in, outd, self.grad.data(), value_of(self, 1).data(), gx->data());
    if (auto* gw = grad_of(self, 1)) gemm_tn(in, outd, rows, value_of(self, 0).data(), self.grad.data(), gw->data());
    if (has_bias) {
      if (auto* gb = grad_of(self, 2)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < outd; ++j) (*gb)[j] += self.grad[r * outd + j];
      }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1), "bmm",
          "incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(bs * m * n, 0.0);
  for (std::size_t i = 0; i < bs; ++i)
    gemm_nn(m, n, k, a.data().data() + i * m * k, b.data().data() + i * k * n, out.data() + i * m * n);
  return make_result("bmm", {bs, m, n}, std::move(out), {a, b}, [bs, m, n, k](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    auto* ga = grad_of(self, 0);
    auto* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < bs; ++i) {
      const double* g = self.grad.data() + i * m * n;
      if (ga) gemm_nt(m, k, n, g, bv.data() + i * k * n, ga->data() + i * m * k);
      if (gb) gemm_tn(k, n, m, av.data() + i * m * k, g, gb->data() + i * k * n);
    }
  });
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2), "bmm_nt",
          "incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  const std::size_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
  std::vector<double> out(bs * m * n, 0.0);
  for (std::size_t i = 0; i < bs; ++i)
    gemm_nt(m, n, k, a.data().data() + i * m * k, b.data().data() + i * n * k, out.data() + i * m * n);
  return make_result("bmm_nt", {bs, m, n}, std::move(out), {a, b}, [bs, m, n, k](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    auto* ga = grad_of(self, 0);
    auto* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < bs; ++i) {
      const double* g = self.grad.data() + i * m * n;
      // dA = G * B ; dB = G^T * A
      if (ga) gemm_nn(m, k, n, g, bv.data() + i * n * k, ga->data() + i * m * k);
      if (gb) gemm_tn(n, k, m, g, av.data() + i * m * k, gb->data() + i * n * k);
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.numel(), "reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
  });
}

namespace {

// Maps every output flat index of a permutation to its source flat index.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& perm) {
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  Shape out_shape(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[perm[i]];
    stride[i] = in_strides[perm[i]];
  }
  const std::size_t n = numel(in_shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < n; ++o) {
    map[o] = src;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src += stride[d];
        break;
      }
      src -= stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t rank = a.rank();
  require(perm.size() == rank, "permute", "permutation rank mismatch");
  std::vector<bool> used(rank, false);
  for (auto p : perm) {
    require(p < rank && !used[p], "permute", "invalid permutation");
    used[p] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = a.dim(perm[i]);
  auto map = std::make_shared<std::vector<std::size_t>>(permutation_map(a.shape(), perm));
  std::vector<double> out(a.numel());
  const auto src = a.data();
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = src[(*map)[o]];
  return make_result("permute", std::move(out_shape), std::move(out), {a}, [map](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t o = 0; o < self.grad.size(); ++o) (*ga)[(*map)[o]] += self.grad[o];
    }
  });
}

Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  require(axis < a.rank() && start + length <= a.dim(axis) && length > 0, "narrow",
          "range out of bounds for " + shape_str(a.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t dim = a.dim(axis);
  Shape shape = a.shape();
  shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  const auto src = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((o * dim + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  return make_result("narrow", std::move(shape), std::move(out), {a}, [outer, inner, dim, start, length](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < length * inner; ++i) (*ga)[(o * dim + start) * inner + i] += self.grad[o * length * inner + i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat", "no inputs");
  const Shape& ref = parts[0].shape();
  require(axis < ref.size(), "concat", "axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> dims;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(s.size() == ref.size(), "concat", "rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      require(i == axis || s[i] == ref[i], "concat", "shape mismatch " + shape_str(s) + " vs " + shape_str(ref));
    dims.push_back(s[axis]);
    total += s[axis];
  }
  Shape shape = ref;
  shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * dims[p] * inner), dims[p] * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
    offset += dims[p];
  }
  return make_result("concat", std::move(shape), std::move(out), parts, [outer, inner, total, dims](Node& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < dims.size(); ++p) {
      if (auto* g = grad_of(self, p)) {
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < dims[p] * inner; ++i) (*g)[o * dims[p] * inner + i] += self.grad[(o * total + off) * inner + i];
      }
      off += dims[p];
    }
  });
}

Tensor index_select(const Tensor& a, const std::vector<std::size_t>& rows) {
  require(a.rank() >= 1, "index_select", "rank-0 input");
  const std::size_t r = a.dim(0);
  const std::size_t width = a.numel() / r;
  Shape shape = a.shape();
  shape[0] = rows.size();
  std::vector<double> out(rows.size() * width);
  const auto src = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < r, "index_select", "row index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return make_result("index_select", std::move(shape), std::move(out), {a}, [rows, width](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) (*ga)[rows[i] * width + j] += self.grad[i * width + j];
    }
  });
}

Tensor tile_leading(const Tensor& a, std::size_t n) {
  require(n > 0, "tile_leading", "count must be positive");
  Shape shape{n};
  shape.insert(shape.end(), a.shape().begin(), a.shape().end());
  const std::size_t width = a.numel();
  std::vector<double> out(n * width);
  for (std::size_t i = 0; i < n; ++i) std::copy(a.data().begin(), a.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * width));
  return make_result("tile_leading", std::move(shape), std::move(out), {a}, [width](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i % width] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary("softplus", a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor silu(const Tensor& a) {
  return unary("silu", a, [](double x) { return x * sigmoid_scalar(x); },
               [](double x, double) {
                 const double s = sigmoid_scalar(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax_last(const Tensor& a) {
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yr[j] /= z;
  }
  return make_result("softmax", a.shape(), std::move(out), {a}, [rows, n](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) (*ga)[r * n + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.shape().back();
  require(gamma.numel() == n && beta.numel() == n, "layer_norm", "affine length mismatch");
  const std::size_t rows = x.numel() / n;
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * gv[j] + bv[j];
    }
  }
  return make_result("layer_norm", x.shape(), std::move(out), {x, gamma, beta}, [rows, n, xhat, inv_std](Node& self) {
    const auto& gv = value_of(self, 1);
    auto* gx = grad_of(self, 0);
    auto* gg = grad_of(self, 1);
    auto* gb = grad_of(self, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = self.grad.data() + r * n;
      const double* h = xhat->data() + r * n;
      if (gg)
        for (std::size_t j = 0; j < n; ++j) (*gg)[j] += dy[j] * h[j];
      if (gb)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += dy[j];
      if (gx) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = dy[j] * gv[j];
          m1 += dh;
          m2 += dh * h[j];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) (*gx)[r * n + j] += (*inv_std)[r] * (dy[j] * gv[j] - m1 - h[j] * m2);
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {1}, {s}, {a}, [](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (auto& g : *ga) g += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor detach(const Tensor& a) { return Tensor::constant(a.shape(), std::vector<double>(a.data().begin(), a.data().end())); }

Tensor straight_through(const Tensor& soft, std::vector<double> offset) {
  require(offset.size() == soft.numel(), "straight_through", "offset length mismatch");
  std::vector<double> out(soft.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = soft.data()[i] + offset[i];
  return make_result("straight_through", soft.shape(), std::move(out), {soft}, [](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
  });
}

Tensor im2col3x3(const Tensor& x) {
  require(x.rank() == 4, "im2col3x3", "expects [T,H,W,C], got " + shape_str(x.shape()));
  const std::size_t t = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  std::vector<double> out(t * h * w * 9 * c, 0.0);
  const auto src = x.data();
  auto for_each = [=](auto&& fn) {
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
              const auto sx = static_cast<std::ptrdiff_t>(xx) + dx;
              if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              const std::size_t tap = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
              const std::size_t dst = (((ti * h + y) * w + xx) * 9 + tap) * c;
              const std::size_t from = ((ti * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)) * c;
              fn(dst, from);
            }
  };
  for_each([&](std::size_t dst, std::size_t from) { std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), c, out.begin() + static_cast<std::ptrdiff_t>(dst)); });
  return make_result("im2col3x3", {t, h, w, 9 * c}, std::move(out), {x}, [for_each, c](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for_each([&](std::size_t dst, std::size_t from) {
        for (std::size_t i = 0; i < c; ++i) (*gx)[from + i] += self.grad[dst + i];
      });
    }
  });
}

}  // namespace gvt::nn
