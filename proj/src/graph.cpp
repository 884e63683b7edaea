// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/graph.h"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace scnas {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Eigen picks vectorized or scalar paths by pointer alignment, which would
// make results depend on where the allocator put a buffer. Products are
// therefore always evaluated on aligned Eigen-owned copies.
template <typename T>
RowMat<T> aligned_copy(const T* data, std::size_t rows, std::size_t cols) {
  return ConstMatMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

template <typename T>
void log_softmax_into(std::span<const T> z, T temperature, std::vector<T>& out) {
  out.resize(z.size());
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : z) mx = std::max(mx, v / temperature);
  T acc = 0;
  for (T v : z) acc += std::exp(v / temperature - mx);
  const T lse = mx + std::log(acc);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / temperature - lse;
}

}  // namespace

std::size_t conv_output_length(std::size_t l_in, std::size_t kernel,
                               std::size_t stride) {
  if (kernel == 0 || stride == 0 || l_in < kernel) return 0;
  return (l_in - kernel) / stride + 1;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(),
          "kl_divergence: vectors must be non-empty and of equal length");
  auto check = [](std::span<const double> v, const char* which) {
    double s = 0;
    for (double x : v) {
      if (!(x >= 0.0)) {
        throw std::invalid_argument(std::string("kl_divergence: ") + which +
                                    " has a negative or NaN entry");
      }
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string("kl_divergence: ") + which +
                                  " is not normalized");
    }
  };
  check(p, "p");
  check(q, "q");
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kLogEpsilon)));
  }
  return std::max(kl, 0.0);
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits, T temperature) {
  std::vector<T> out;
  log_softmax_into(logits, temperature, out);
  for (auto& v : out) v = std::exp(v);
  return out;
}

template std::vector<float> softmax(std::span<const float>, float);
template std::vector<double> softmax(std::span<const double>, double);

template <typename T>
Var Graph<T>::record(const char* op, Tensor<T> value,
                     std::function<void()> backward) {
  if (backward_done_) {
    throw std::logic_error("graph: cannot record after backward()");
  }
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(Var v) {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph: invalid node");
  return nodes_[v.id];
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph: invalid node");
  return nodes_[v.id];
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var v) {
  node(v);
  return grad_of(v.id);
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return record("constant", std::move(value), nullptr);
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  return record("variable", std::move(value), [] {});
}

template <typename T>
Var Graph<T>::parameter(std::size_t index) {
  require(params_ != nullptr, "graph: no parameter set attached");
  const auto& p = params_->value(index);
  std::vector<SliceRange> full;
  for (auto d : p.shape()) full.push_back({0, d});
  return parameter_slice(index, std::move(full));
}

template <typename T>
Var Graph<T>::parameter_slice(std::size_t index, std::vector<SliceRange> ranges) {
  require(params_ != nullptr, "graph: no parameter set attached");
  const auto& p = params_->value(index);
  const std::size_t rank = p.rank();
  require(ranges.size() == rank && rank >= 1 && rank <= 3,
          "parameter_slice: rank mismatch for '" + params_->name(index) + "'");
  Shape out_shape;
  for (std::size_t d = 0; d < rank; ++d) {
    require(ranges[d].length >= 1 &&
                ranges[d].offset + ranges[d].length <= p.dim(d),
            "parameter_slice: window out of bounds for '" +
                params_->name(index) + "'");
    out_shape.push_back(ranges[d].length);
  }
  // Pad to rank 3 so one loop nest covers every case.
  std::array<std::size_t, 3> dims{1, 1, 1}, off{0, 0, 0}, len{1, 1, 1};
  for (std::size_t d = 0; d < rank; ++d) {
    dims[3 - rank + d] = p.dim(d);
    off[3 - rank + d] = ranges[d].offset;
    len[3 - rank + d] = ranges[d].length;
  }
  Tensor<T> out(out_shape);
  std::size_t o = 0;
  for (std::size_t i = 0; i < len[0]; ++i) {
    for (std::size_t j = 0; j < len[1]; ++j) {
      const T* src =
          p.data() + ((off[0] + i) * dims[1] + (off[1] + j)) * dims[2] + off[2];
      std::copy(src, src + len[2], out.data() + o);
      o += len[2];
    }
  }
  const std::size_t id = nodes_.size();
  return record("parameter", std::move(out), [this, id, index, dims, off, len] {
    if (grads_ == nullptr) return;
    const auto& g = nodes_[id].grad;
    if (g.empty()) return;
    auto& dst = grads_->grad(index);
    auto& mask = grads_->touched(index);
    std::size_t o = 0;
    for (std::size_t i = 0; i < len[0]; ++i) {
      for (std::size_t j = 0; j < len[1]; ++j) {
        const std::size_t base =
            ((off[0] + i) * dims[1] + (off[1] + j)) * dims[2] + off[2];
        for (std::size_t k = 0; k < len[2]; ++k) {
          dst[base + k] += g[o + k];
          mask[base + k] = 1;
        }
        o += len[2];
      }
    }
  });
}

template <typename T>
Var Graph<T>::conv1d(Var x, Var w, Var b, std::size_t stride,
                     std::string_view label) {
  const auto& xv = node(x).value;
  const auto& wv = node(w).value;
  const auto& bv = node(b).value;
  const std::string where = label.empty() ? std::string("conv1d")
                                          : "conv1d[" + std::string(label) + "]";
  require(xv.rank() == 2 && wv.rank() == 3 && bv.rank() == 1,
          where + ": expected input [C x L], weights [C_out x C_in x K], bias [C_out]");
  const std::size_t c_in = xv.dim(0), l_in = xv.dim(1);
  const std::size_t c_out = wv.dim(0), k = wv.dim(2);
  require(wv.dim(1) == c_in, where + ": input has " + std::to_string(c_in) +
                                 " channels, weights expect " +
                                 std::to_string(wv.dim(1)));
  require(bv.dim(0) == c_out, where + ": bias length mismatch");
  require(stride >= 1, where + ": stride must be >= 1");
  if (l_in < k) {
    throw std::invalid_argument(where + ": input length " + std::to_string(l_in) +
                                " is shorter than kernel " + std::to_string(k));
  }
  const std::size_t l_out = conv_output_length(l_in, k, stride);
  const std::size_t rows = c_in * k;
  const bool direct = (k == 1 && stride == 1);

  // im2col: cols[i*K + j, t] = x[i, t*stride + j]
  auto cols = std::make_shared<std::vector<T>>();
  if (!direct) {
    cols->resize(rows * l_out);
    for (std::size_t i = 0; i < c_in; ++i) {
      const T* xr = xv.data() + i * l_in;
      for (std::size_t j = 0; j < k; ++j) {
        T* cr = cols->data() + (i * k + j) * l_out;
        if (stride == 1) {
          std::copy(xr + j, xr + j + l_out, cr);
        } else {
          for (std::size_t t = 0; t < l_out; ++t) cr[t] = xr[t * stride + j];
        }
      }
    }
  }
  const T* col_data = direct ? xv.data() : cols->data();

  Tensor<T> out(Shape{c_out, l_out});
  const RowMat<T> y = aligned_copy(wv.data(), c_out, rows) * aligned_copy(col_data, rows, l_out);
  for (std::size_t c = 0; c < c_out; ++c) {
    for (std::size_t t = 0; t < l_out; ++t) out[c * l_out + t] = y(c, t) + bv[c];
  }

  const std::size_t id = nodes_.size();
  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return record("conv1d", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty()) return;
    const RowMat<T> dy = aligned_copy(gy.data(), c_out, l_out);
    const T* cdata = direct ? nodes_[xi].value.data() : cols->data();
    if (nodes_[wi].backward) {
      const RowMat<T> dw = dy * aligned_copy(cdata, rows, l_out).transpose();
      auto& g = grad_of(wi);
      for (std::size_t i = 0; i < c_out * rows; ++i) g[i] += dw.data()[i];
    }
    if (nodes_[bi].backward) {
      auto& db = grad_of(bi);
      for (std::size_t c = 0; c < c_out; ++c) {
        T sum = 0;
        for (std::size_t t = 0; t < l_out; ++t) sum += dy(c, t);
        db[c] += sum;
      }
    }
    if (nodes_[xi].backward) {
      const RowMat<T> dcols = aligned_copy(nodes_[wi].value.data(), c_out, rows).transpose() * dy;
      auto& dxt = grad_of(xi);
      if (direct) {
        for (std::size_t i = 0; i < rows * l_out; ++i) dxt[i] += dcols.data()[i];
      } else {
        for (std::size_t i = 0; i < c_in; ++i) {
          T* dxr = dxt.data() + i * l_in;
          for (std::size_t j = 0; j < k; ++j) {
            const T* dc = dcols.data() + (i * k + j) * l_out;
            for (std::size_t t = 0; t < l_out; ++t) dxr[t * stride + j] += dc[t];
          }
        }
      }
    }
  });
}

template <typename T>
Var Graph<T>::channel_norm(Var x, Var gain, Var shift, T eps) {
  const auto& xv = node(x).value;
  const auto& gv = node(gain).value;
  const auto& sv = node(shift).value;
  require(xv.rank() == 2, "channel_norm: expected input [C x L]");
  const std::size_t c_n = xv.dim(0), l_n = xv.dim(1);
  require(c_n >= 1 && l_n >= 1, "channel_norm: empty input");
  require(gv.size() == c_n && sv.size() == c_n,
          "channel_norm: gain/shift length must equal channel count");

  std::vector<T> mean(l_n, T(0)), var(l_n, T(0));
  for (std::size_t c = 0; c < c_n; ++c) {
    const T* r = xv.data() + c * l_n;
    for (std::size_t t = 0; t < l_n; ++t) mean[t] += r[t];
  }
  for (auto& m : mean) m /= T(c_n);
  for (std::size_t c = 0; c < c_n; ++c) {
    const T* r = xv.data() + c * l_n;
    for (std::size_t t = 0; t < l_n; ++t) {
      const T d = r[t] - mean[t];
      var[t] += d * d;
    }
  }
  auto inv = std::make_shared<std::vector<T>>(l_n);
  for (std::size_t t = 0; t < l_n; ++t) {
    (*inv)[t] = T(1) / std::sqrt(var[t] / T(c_n) + eps);
  }
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  Tensor<T> out(xv.shape());
  for (std::size_t c = 0; c < c_n; ++c) {
    const T* r = xv.data() + c * l_n;
    T* h = xhat->data() + c * l_n;
    T* o = out.data() + c * l_n;
    for (std::size_t t = 0; t < l_n; ++t) {
      h[t] = (r[t] - mean[t]) * (*inv)[t];
      o[t] = gv[c] * h[t] + sv[c];
    }
  }

  const std::size_t id = nodes_.size();
  const std::size_t xi = x.id, gi = gain.id, si = shift.id;
  return record("channel_norm", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty()) return;
    const auto& g = nodes_[gi].value;
    if (nodes_[gi].backward) {
      auto& dg = grad_of(gi);
      for (std::size_t c = 0; c < c_n; ++c) {
        const T* dy = gy.data() + c * l_n;
        const T* h = xhat->data() + c * l_n;
        T acc = 0;
        for (std::size_t t = 0; t < l_n; ++t) acc += dy[t] * h[t];
        dg[c] += acc;
      }
    }
    if (nodes_[si].backward) {
      auto& ds = grad_of(si);
      for (std::size_t c = 0; c < c_n; ++c) {
        const T* dy = gy.data() + c * l_n;
        T acc = 0;
        for (std::size_t t = 0; t < l_n; ++t) acc += dy[t];
        ds[c] += acc;
      }
    }
    if (nodes_[xi].backward) {
      // dx = inv * (dxhat - mean_c(dxhat) - xhat * mean_c(dxhat * xhat))
      std::vector<T> m1(l_n, T(0)), m2(l_n, T(0));
      for (std::size_t c = 0; c < c_n; ++c) {
        const T* dy = gy.data() + c * l_n;
        const T* h = xhat->data() + c * l_n;
        for (std::size_t t = 0; t < l_n; ++t) {
          const T dh = dy[t] * g[c];
          m1[t] += dh;
          m2[t] += dh * h[t];
        }
      }
      for (std::size_t t = 0; t < l_n; ++t) {
        m1[t] /= T(c_n);
        m2[t] /= T(c_n);
      }
      auto& dx = grad_of(xi);
      for (std::size_t c = 0; c < c_n; ++c) {
        const T* dy = gy.data() + c * l_n;
        const T* h = xhat->data() + c * l_n;
        T* d = dx.data() + c * l_n;
        for (std::size_t t = 0; t < l_n; ++t) {
          d[t] += (*inv)[t] * (dy[t] * g[c] - m1[t] - h[t] * m2[t]);
        }
      }
    }
  });
}

template <typename T>
Var Graph<T>::relu(Var x) {
  const auto& xv = node(x).value;
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  const std::size_t id = nodes_.size(), xi = x.id;
  return record("relu", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[xi].backward) return;
    const auto& in = nodes_[xi].value;
    auto& dx = grad_of(xi);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > T(0)) dx[i] += gy[i];
    }
  });
}

template <typename T>
Var Graph<T>::crop_time(Var x, std::size_t offset, std::size_t length) {
  const auto& xv = node(x).value;
  require(xv.rank() == 2, "crop_time: expected input [C x L]");
  require(length >= 1 && offset + length <= xv.dim(1),
          "crop_time: window [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
              ") outside length " + std::to_string(xv.dim(1)));
  const std::size_t c_n = xv.dim(0), l_n = xv.dim(1);
  Tensor<T> out(Shape{c_n, length});
  for (std::size_t c = 0; c < c_n; ++c) {
    std::copy_n(xv.data() + c * l_n + offset, length, out.data() + c * length);
  }
  const std::size_t id = nodes_.size(), xi = x.id;
  return record("crop_time", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[xi].backward) return;
    auto& dx = grad_of(xi);
    for (std::size_t c = 0; c < c_n; ++c) {
      for (std::size_t j = 0; j < length; ++j) dx[c * l_n + offset + j] += gy[c * length + j];
    }
  });
}

template <typename T>
Var Graph<T>::global_avg_pool(Var x) {
  const auto& xv = node(x).value;
  require(xv.rank() == 2 && xv.dim(1) >= 1,
          "global_avg_pool: expected input [C x L] with L >= 1");
  const std::size_t c_n = xv.dim(0), l_n = xv.dim(1);
  Tensor<T> out(Shape{c_n});
  for (std::size_t c = 0; c < c_n; ++c) {
    const T* r = xv.data() + c * l_n;
    T acc = 0;
    for (std::size_t t = 0; t < l_n; ++t) acc += r[t];
    out[c] = acc / T(l_n);
  }
  const std::size_t id = nodes_.size(), xi = x.id;
  return record("global_avg_pool", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[xi].backward) return;
    auto& dx = grad_of(xi);
    for (std::size_t c = 0; c < c_n; ++c) {
      const T g = gy[c] / T(l_n);
      T* d = dx.data() + c * l_n;
      for (std::size_t t = 0; t < l_n; ++t) d[t] += g;
    }
  });
}

template <typename T>
Var Graph<T>::affine(Var x, Var w, Var b) {
  const auto& xv = node(x).value;
  const auto& wv = node(w).value;
  const auto& bv = node(b).value;
  require(xv.rank() == 1 && wv.rank() == 2 && bv.rank() == 1,
          "affine: expected x [C], w [N x C], b [N]");
  const std::size_t n = wv.dim(0), c_n = wv.dim(1);
  require(xv.dim(0) == c_n && bv.dim(0) == n, "affine: shape mismatch");
  Tensor<T> out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    T acc = bv[i];
    for (std::size_t c = 0; c < c_n; ++c) acc += wv.at(i, c) * xv[c];
    out[i] = acc;
  }
  const std::size_t id = nodes_.size(), xi = x.id, wi = w.id, bi = b.id;
  return record("affine", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty()) return;
    const auto& xin = nodes_[xi].value;
    const auto& win = nodes_[wi].value;
    if (nodes_[wi].backward) {
      auto& dw = grad_of(wi);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < c_n; ++c) dw.at(i, c) += gy[i] * xin[c];
      }
    }
    if (nodes_[bi].backward) {
      auto& db = grad_of(bi);
      for (std::size_t i = 0; i < n; ++i) db[i] += gy[i];
    }
    if (nodes_[xi].backward) {
      auto& dx = grad_of(xi);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < c_n; ++c) dx[c] += win.at(i, c) * gy[i];
      }
    }
  });
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.shape() == bv.shape(), "add: shape mismatch " + shape_str(av.shape()) +
                                        " vs " + shape_str(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t id = nodes_.size(), ai = a.id, bi = b.id;
  return record("add", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty()) return;
    for (std::size_t src : {ai, bi}) {
      if (!nodes_[src].backward) continue;
      auto& d = grad_of(src);
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i];
    }
  });
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.shape() == bv.shape(), "mul: shape mismatch");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t id = nodes_.size(), ai = a.id, bi = b.id;
  return record("mul", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty()) return;
    const auto& av2 = nodes_[ai].value;
    const auto& bv2 = nodes_[bi].value;
    if (nodes_[ai].backward) {
      auto& d = grad_of(ai);
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i] * bv2[i];
    }
    if (nodes_[bi].backward) {
      auto& d = grad_of(bi);
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i] * av2[i];
    }
  });
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  const auto& av = node(a).value;
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const std::size_t id = nodes_.size(), ai = a.id;
  return record("scale", std::move(out), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[ai].backward) return;
    auto& d = grad_of(ai);
    for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i] * factor;
  });
}

template <typename T>
Var Graph<T>::sum(Var a) {
  const auto& av = node(a).value;
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i];
  const std::size_t id = nodes_.size(), ai = a.id;
  return record("sum", Tensor<T>(Shape{1}, acc), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[ai].backward) return;
    auto& d = grad_of(ai);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gy[0];
  });
}

template <typename T>
Var Graph<T>::softmax_cross_entropy(Var logits, std::size_t label) {
  const auto& zv = node(logits).value;
  require(zv.rank() == 1 && zv.size() >= 1, "softmax_cross_entropy: expected a logit vector");
  if (label >= zv.size()) {
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(zv.size()) +
                            " classes");
  }
  std::vector<T> logp;
  log_softmax_into(zv.span(), T(1), logp);
  const T loss = -logp[label];
  const std::size_t id = nodes_.size(), zi = logits.id;
  return record("softmax_cross_entropy", Tensor<T>(Shape{1}, loss),
                [=, this] {
                  const auto& gy = nodes_[id].grad;
                  if (gy.empty() || !nodes_[zi].backward) return;
                  auto& dz = grad_of(zi);
                  for (std::size_t i = 0; i < logp.size(); ++i) {
                    const T p = std::exp(logp[i]);
                    dz[i] += gy[0] * (p - (i == label ? T(1) : T(0)));
                  }
                });
}

template <typename T>
Var Graph<T>::kl_to_target(Var logits, std::span<const T> target, T temperature) {
  const auto& zv = node(logits).value;
  require(zv.rank() == 1 && zv.size() == target.size(),
          "kl_to_target: logits and target must have the same length");
  require(temperature > T(0), "kl_to_target: temperature must be positive");
  std::vector<T> p(target.begin(), target.end());
  T psum = 0;
  for (T v : p) {
    require(v >= T(0), "kl_to_target: target has a negative entry");
    psum += v;
  }
  require(std::abs(psum - T(1)) <= T(1e-4), "kl_to_target: target is not normalized");
  std::vector<T> logq;
  log_softmax_into(zv.span(), temperature, logq);
  T kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > T(0)) kl += p[i] * (std::log(p[i]) - logq[i]);
  }
  const std::size_t id = nodes_.size(), zi = logits.id;
  return record("kl_to_target", Tensor<T>(Shape{1}, kl), [=, this] {
    const auto& gy = nodes_[id].grad;
    if (gy.empty() || !nodes_[zi].backward) return;
    auto& dz = grad_of(zi);
    for (std::size_t i = 0; i < p.size(); ++i) {
      dz[i] += gy[0] * (psum * std::exp(logq[i]) - p[i]) / temperature;
    }
  });
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (nodes_.empty()) {
    throw std::logic_error("backward: no forward pass has been recorded");
  }
  if (backward_done_) {
    throw std::logic_error("backward: already called on this graph");
  }
  auto& l = node(loss);
  if (l.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(l.value.shape()));
  }
  backward_done_ = true;
  grad_of(loss.id)[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace scnas
