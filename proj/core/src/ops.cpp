#include "lvsr/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

#include "lvsr/errors.hpp"
#include "lvsr/mac_counter.hpp"
#include "spatial.hpp"

namespace lvsr {

using detail::make_result;
using detail::Node;

namespace {

std::atomic<std::uint64_t> g_macs{0};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename T>
void require_defined(const Tensor<T>& x, const char* op) {
  if (!x.defined()) throw ShapeError(std::string(op) + ": undefined input");
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* op, Fwd fwd, Deriv deriv) {
  require_defined(x, op);
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {x}, op, [xn, deriv](Node<T>* self) {
    return [xn, self, deriv] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * deriv(xn->value[i], self->value[i]);
    };
  });
}

struct AxisSplit {
  std::size_t outer, axis, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

MacCounter::MacCounter() : start_(g_macs.load()) {}
std::uint64_t MacCounter::count() const { return g_macs.load() - start_; }
void detail::record_macs(std::uint64_t n) { g_macs.fetch_add(n, std::memory_order_relaxed); }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "relu";
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}
bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [an, bn](Node<T>* self) {
    return [an, bn, self] {
      for (auto* n : {an, bn}) {
        if (!n->requires_grad) continue;
        auto& g = n->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i];
      }
    };
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [an, bn](Node<T>* self) {
    return [an, bn, self] {
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * an->value[i];
      }
    };
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, "relu", [](T v) { return v > T{0} || std::isnan(v) ? v : T{0}; }, [](T in, T) { return in > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        // split by sign so exp never overflows
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T out) { return out * (T{1} - out); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, "tanh", [](T v) { return std::tanh(v); }, [](T, T out) { return T{1} - out * out; });
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(x);
    case Activation::kTanh: return tanh(x);
    case Activation::kSigmoid: return sigmoid(x);
  }
  return relu(x);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.bernoulli(p) ? T{0} : keep_scale;
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {x}, "dropout",
                        [xn, mask = std::move(mask)](Node<T>* self) mutable {
                          return [xn, self, mask = std::move(mask)] {
                            auto& g = xn->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * mask[i];
                          };
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  require_defined(x, "sum");
  T acc{0};
  for (T v : x.data()) acc += v;
  auto* xn = x.node().get();
  return make_result<T>(Shape{1}, {acc}, {x}, "sum", [xn](Node<T>* self) {
    return [xn, self] {
      auto& g = xn->grad_buffer();
      for (auto& v : g) v += self->grad[0];
    };
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  if (weights.size() != x.numel()) throw ShapeError("weighted_sum: weight count mismatch");
  T acc{0};
  auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) acc += in[i] * weights[i];
  std::vector<T> w(weights.begin(), weights.end());
  auto* xn = x.node().get();
  return make_result<T>(Shape{1}, {acc}, {x}, "weighted_sum", [xn, w = std::move(w)](Node<T>* self) {
    return [xn, self, w] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[0] * w[i];
    };
  });
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  require_defined(x, "mean_axis");
  if (axis >= x.rank()) throw ShapeError("mean_axis: axis out of range for " + to_string(x.shape()));
  if (x.rank() == 1) return mean(x);
  const auto s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto in = x.data();
  std::vector<T> out(s.outer * s.inner, T{0});
  const T inv = T{1} / static_cast<T>(s.axis);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.axis; ++a)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += in[(o * s.axis + a) * s.inner + i];
  for (auto& v : out) v *= inv;
  auto* xn = x.node().get();
  return make_result<T>(out_shape, std::move(out), {x}, "mean_axis", [xn, s, inv](Node<T>* self) {
    return [xn, self, s, inv] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t a = 0; a < s.axis; ++a)
          for (std::size_t i = 0; i < s.inner; ++i)
            g[(o * s.axis + a) * s.inner + i] += self->grad[o * s.inner + i] * inv;
    };
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  require_defined(x, "softmax");
  if (axis >= x.rank()) throw ShapeError("softmax: axis out of range for " + to_string(x.shape()));
  const auto s = split_axis(x.shape(), axis);
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t a) { return (o * s.axis + a) * s.inner + i; };
      T m = in[at(0)];
      for (std::size_t a = 1; a < s.axis; ++a) m = std::max(m, in[at(a)]);
      T z{0};
      for (std::size_t a = 0; a < s.axis; ++a) z += (out[at(a)] = std::exp(in[at(a)] - m));
      for (std::size_t a = 0; a < s.axis; ++a) out[at(a)] /= z;
    }
  }
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax", [xn, s](Node<T>* self) {
    return [xn, self, s] {
      auto& g = xn->grad_buffer();
      const auto& y = self->value;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          auto at = [&](std::size_t a) { return (o * s.axis + a) * s.inner + i; };
          T dot{0};
          for (std::size_t a = 0; a < s.axis; ++a) dot += self->grad[at(a)] * y[at(a)];
          for (std::size_t a = 0; a < s.axis; ++a) g[at(a)] += y[at(a)] * (self->grad[at(a)] - dot);
        }
      }
    };
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_defined(x, "linear");
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  const std::size_t n = x.dim(0), f = x.dim(1), k = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != k)) {
    throw ShapeError("linear: bias " + to_string(bias.shape()) + " does not match " + std::to_string(k) +
                     " outputs");
  }
  auto xv = x.data();
  auto wv = weight.data();
  std::vector<T> out(n * k, T{0});
  for (std::size_t r = 0; r < n; ++r) {
    T* y = out.data() + r * k;
    for (std::size_t c = 0; c < f; ++c) {
      const T a = xv[r * f + c];
      const T* w = wv.data() + c * k;
      for (std::size_t j = 0; j < k; ++j) y[j] += a * w[j];
    }
    if (bias.defined()) {
      auto bv = bias.data();
      for (std::size_t j = 0; j < k; ++j) y[j] += bv[j];
    }
  }
  detail::record_macs(static_cast<std::uint64_t>(n) * f * k);
  auto* xn = x.node().get();
  auto* wn = weight.node().get();
  auto* bn = bias.defined() ? bias.node().get() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(Shape{n, k}, std::move(out), inputs, "linear", [=](Node<T>* self) {
    return [=] {
      const auto& gy = self->grad;
      if (xn->requires_grad) {
        auto& gx = xn->grad_buffer();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < f; ++c) {
            T acc{0};
            const T* w = wn->value.data() + c * k;
            const T* dy = gy.data() + r * k;
            for (std::size_t j = 0; j < k; ++j) acc += dy[j] * w[j];
            gx[r * f + c] += acc;
          }
      }
      if (wn->requires_grad) {
        auto& gw = wn->grad_buffer();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < f; ++c) {
            const T a = xn->value[r * f + c];
            T* w = gw.data() + c * k;
            const T* dy = gy.data() + r * k;
            for (std::size_t j = 0; j < k; ++j) w[j] += a * dy[j];
          }
      }
      if (bn && bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < k; ++j) gb[j] += gy[r * k + j];
      }
    };
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& soft_targets) {
  require_defined(logits, "cross_entropy");
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be [N,K], got " + to_string(logits.shape()));
  if (soft_targets.shape() != logits.shape()) {
    throw ShapeError("cross_entropy: targets " + to_string(soft_targets.shape()) + " vs logits " +
                     to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto z = logits.data();
  auto t = soft_targets.data();
  std::vector<T> probs(n * k);
  T loss{0};
  for (std::size_t r = 0; r < n; ++r) {
    const T* zr = z.data() + r * k;
    const T m = *std::max_element(zr, zr + k);
    T s{0};
    for (std::size_t j = 0; j < k; ++j) s += std::exp(zr[j] - m);
    const T lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) {
      probs[r * k + j] = std::exp(zr[j] - lse);
      loss -= t[r * k + j] * (zr[j] - lse);
    }
  }
  loss /= static_cast<T>(n);
  std::vector<T> targets(t.begin(), t.end());
  auto* zn = logits.node().get();
  return make_result<T>(Shape{1}, {loss}, {logits}, "cross_entropy",
                        [zn, n, k, probs = std::move(probs), targets = std::move(targets)](Node<T>* self) {
                          return [=] {
                            auto& g = zn->grad_buffer();
                            const T scale_factor = self->grad[0] / static_cast<T>(n);
                            for (std::size_t r = 0; r < n; ++r) {
                              T mass{0};
                              for (std::size_t j = 0; j < k; ++j) mass += targets[r * k + j];
                              for (std::size_t j = 0; j < k; ++j)
                                g[r * k + j] += scale_factor * (mass * probs[r * k + j] - targets[r * k + j]);
                            }
                          };
                        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || labels.size() != logits.dim(0)) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     to_string(logits.shape()));
  }
  const std::size_t k = logits.dim(1);
  std::vector<T> onehot(logits.numel(), T{0});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= k) throw ShapeError("cross_entropy: label " + std::to_string(labels[r]) + " >= K");
    onehot[r * k + labels[r]] = T{1};
  }
  return cross_entropy(logits, Tensor<T>(logits.shape(), std::move(onehot)));
}

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, const std::vector<std::size_t>& window, const std::vector<std::size_t>& stride) {
  require_defined(x, "avg_pool");
  if (x.rank() < 3 || window.size() != x.rank() - 2 || stride.size() != window.size()) {
    throw ShapeError("avg_pool: window rank does not match input " + to_string(x.shape()));
  }
  Shape out_shape = {x.dim(0), x.dim(1)};
  for (std::size_t i = 0; i < window.size(); ++i) {
    const std::size_t in = x.dim(i + 2);
    if (window[i] == 0 || stride[i] == 0 || window[i] > in) {
      throw ShapeError("avg_pool: window " + std::to_string(window[i]) + " exceeds spatial dim " +
                       std::to_string(in));
    }
    out_shape.push_back((in - window[i]) / stride[i] + 1);
  }
  const auto ie = detail::extent_from(x.shape());
  const auto oe = detail::extent_from(out_shape);
  const auto k = detail::align3(window, 1);
  const auto st = detail::align3(stride, 1);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const T inv = T{1} / static_cast<T>(k[0] * k[1] * k[2]);
  auto in = x.data();
  std::vector<T> out(planes * oe.size(), T{0});
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t od = 0; od < oe.d; ++od)
        for (std::size_t oh = 0; oh < oe.h; ++oh)
          for (std::size_t ow = 0; ow < oe.w; ++ow) {
            const std::size_t o = p * oe.size() + (od * oe.h + oh) * oe.w + ow;
            for (std::size_t a = 0; a < k[0]; ++a)
              for (std::size_t b = 0; b < k[1]; ++b)
                for (std::size_t c = 0; c < k[2]; ++c) {
                  const std::size_t i =
                      p * ie.size() + ((od * st[0] + a) * ie.h + oh * st[1] + b) * ie.w + ow * st[2] + c;
                  fn(o, i);
                }
          }
  };
  for_each_tap([&](std::size_t o, std::size_t i) { out[o] += in[i]; });
  for (auto& v : out) v *= inv;
  auto* xn = x.node().get();
  return make_result<T>(out_shape, std::move(out), {x}, "avg_pool", [xn, for_each_tap, inv](Node<T>* self) {
    return [xn, self, for_each_tap, inv] {
      auto& g = xn->grad_buffer();
      for_each_tap([&](std::size_t o, std::size_t i) { g[i] += self->grad[o] * inv; });
    };
  });
}

template <typename T>
Tensor<T> max_pool(const Tensor<T>& x, const std::vector<std::size_t>& window, const std::vector<std::size_t>& stride,
                   const std::vector<std::size_t>& padding) {
  require_defined(x, "max_pool");
  if (x.rank() < 3 || window.size() != x.rank() - 2 || stride.size() != window.size() ||
      padding.size() != window.size()) {
    throw ShapeError("max_pool: window rank does not match input " + to_string(x.shape()));
  }
  Shape out_shape = {x.dim(0), x.dim(1)};
  for (std::size_t i = 0; i < window.size(); ++i) {
    const std::size_t in = x.dim(i + 2) + 2 * padding[i];
    if (window[i] == 0 || stride[i] == 0 || window[i] > in) throw ShapeError("max_pool: window exceeds input");
    out_shape.push_back((in - window[i]) / stride[i] + 1);
  }
  const auto ie = detail::extent_from(x.shape());
  const auto oe = detail::extent_from(out_shape);
  const auto k = detail::align3(window, 1);
  const auto st = detail::align3(stride, 1);
  const auto pd = detail::align3(padding, 0);
  const std::size_t planes = x.dim(0) * x.dim(1);
  auto in = x.data();
  std::vector<T> out(planes * oe.size());
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t od = 0; od < oe.d; ++od)
      for (std::size_t oh = 0; oh < oe.h; ++oh)
        for (std::size_t ow = 0; ow < oe.w; ++ow) {
          const std::size_t o = p * oe.size() + (od * oe.h + oh) * oe.w + ow;
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = 0;
          for (std::size_t a = 0; a < k[0]; ++a) {
            const auto zd = static_cast<std::ptrdiff_t>(od * st[0] + a) - static_cast<std::ptrdiff_t>(pd[0]);
            if (zd < 0 || zd >= static_cast<std::ptrdiff_t>(ie.d)) continue;
            for (std::size_t b = 0; b < k[1]; ++b) {
              const auto zh = static_cast<std::ptrdiff_t>(oh * st[1] + b) - static_cast<std::ptrdiff_t>(pd[1]);
              if (zh < 0 || zh >= static_cast<std::ptrdiff_t>(ie.h)) continue;
              for (std::size_t c = 0; c < k[2]; ++c) {
                const auto zw = static_cast<std::ptrdiff_t>(ow * st[2] + c) - static_cast<std::ptrdiff_t>(pd[2]);
                if (zw < 0 || zw >= static_cast<std::ptrdiff_t>(ie.w)) continue;
                const std::size_t i = p * ie.size() + (static_cast<std::size_t>(zd) * ie.h + static_cast<std::size_t>(zh)) * ie.w +
                                      static_cast<std::size_t>(zw);
                if (in[i] > best || (std::isnan(in[i]) && !std::isnan(best))) {  // NaN must surface
                  best = in[i];
                  best_i = i;
                }
              }
            }
          }
          out[o] = best;
          argmax[o] = best_i;
        }
  auto* xn = x.node().get();
  return make_result<T>(out_shape, std::move(out), {x}, "max_pool",
                        [xn, argmax = std::move(argmax)](Node<T>* self) mutable {
                          return [xn, self, argmax = std::move(argmax)] {
                            auto& g = xn->grad_buffer();
                            for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self->grad[o];
                          };
                        });
}

template <typename T>
Tensor<T> global_avg_pool_spatial(const Tensor<T>& x) {
  require_defined(x, "global_avg_pool_spatial");
  if (x.rank() < 3) throw ShapeError("global_avg_pool_spatial: expected [N,C,...], got " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t area = x.numel() / planes;
  auto in = x.data();
  std::vector<T> out(planes, T{0});
  const T inv = T{1} / static_cast<T>(area);
  for (std::size_t p = 0; p < planes; ++p) {
    T acc{0};
    for (std::size_t i = 0; i < area; ++i) acc += in[p * area + i];
    out[p] = acc * inv;
  }
  auto* xn = x.node().get();
  return make_result<T>(Shape{x.dim(0), x.dim(1)}, std::move(out), {x}, "global_avg_pool",
                        [xn, area, inv](Node<T>* self) {
                          return [xn, self, area, inv] {
                            auto& g = xn->grad_buffer();
                            for (std::size_t p = 0; p < self->grad.size(); ++p)
                              for (std::size_t i = 0; i < area; ++i) g[p * area + i] += self->grad[p] * inv;
                          };
                        });
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, const std::vector<std::size_t>& target) {
  require_defined(x, "upsample_nearest");
  if (x.rank() < 3 || target.size() != x.rank() - 2) {
    throw ShapeError("upsample_nearest: target rank does not match input " + to_string(x.shape()));
  }
  Shape out_shape = {x.dim(0), x.dim(1)};
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < x.dim(i + 2)) {
      throw ShapeError("upsample_nearest: target " + std::to_string(target[i]) + " smaller than input " +
                       std::to_string(x.dim(i + 2)));
    }
    out_shape.push_back(target[i]);
  }
  const auto ie = detail::extent_from(x.shape());
  const auto oe = detail::extent_from(out_shape);
  const std::size_t planes = x.dim(0) * x.dim(1);
  std::vector<std::size_t> src(oe.size());
  for (std::size_t od = 0; od < oe.d; ++od)
    for (std::size_t oh = 0; oh < oe.h; ++oh)
      for (std::size_t ow = 0; ow < oe.w; ++ow) {
        const std::size_t sd = od * ie.d / oe.d, sh = oh * ie.h / oe.h, sw = ow * ie.w / oe.w;
        src[(od * oe.h + oh) * oe.w + ow] = (sd * ie.h + sh) * ie.w + sw;
      }
  auto in = x.data();
  std::vector<T> out(planes * oe.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t o = 0; o < src.size(); ++o) out[p * oe.size() + o] = in[p * ie.size() + src[o]];
  auto* xn = x.node().get();
  const std::size_t in_area = ie.size(), out_area = oe.size();
  return make_result<T>(out_shape, std::move(out), {x}, "upsample_nearest",
                        [xn, src = std::move(src), planes, in_area, out_area](Node<T>* self) mutable {
                          return [=, src = std::move(src)] {
                            auto& g = xn->grad_buffer();
                            for (std::size_t p = 0; p < planes; ++p)
                              for (std::size_t o = 0; o < out_area; ++o)
                                g[p * in_area + src[o]] += self->grad[p * out_area + o];
                          };
                        });
}

std::size_t split_point(std::size_t channels, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("split ratio must lie in (0,1], got " + std::to_string(ratio));
  }
  if (ratio == 1.0) return channels;
  const auto first = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(channels)));
  if (first == 0 || first >= channels) {
    throw ShapeError("split ratio " + std::to_string(ratio) + " leaves an empty branch for " +
                     std::to_string(channels) + " channels");
  }
  return first;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, double ratio) {
  require_defined(x, "split_channels");
  if (x.rank() < 2) throw ShapeError("split_channels: expected [N,C,...]");
  return split_channels_at(x, split_point(x.dim(1), ratio));
}

namespace {

template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.numel() / (n * c);
  Shape shape = x.shape();
  shape[1] = count;
  auto in = x.data();
  std::vector<T> out(n * count * inner);
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(in.data() + (b * c + begin) * inner, count * inner, out.data() + b * count * inner);
  auto* xn = x.node().get();
  return make_result<T>(shape, std::move(out), {x}, "channel_slice", [=](Node<T>* self) {
    return [=] {
      auto& g = xn->grad_buffer();
      for (std::size_t b = 0; b < n; ++b) {
        T* dst = g.data() + (b * c + begin) * inner;
        const T* src = self->grad.data() + b * count * inner;
        for (std::size_t i = 0; i < count * inner; ++i) dst[i] += src[i];
      }
    };
  });
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels_at(const Tensor<T>& x, std::size_t first) {
  const std::size_t c = x.dim(1);
  if (first == 0 || first > c) throw ShapeError("split_channels: split point out of range");
  if (first == c) return {x, Tensor<T>{}};
  return {channel_slice(x, 0, first), channel_slice(x, first, c - first)};
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  std::vector<Tensor<T>> present;
  for (const auto& p : parts)
    if (p.defined()) present.push_back(p);
  if (present.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  if (present.size() == 1) return present.front();
  const Shape& ref = present.front().shape();
  if (ref.size() < 2) throw ShapeError("concat_channels: expected [N,C,...]");
  std::size_t total_c = 0;
  for (const auto& p : present) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == 1) || s[i] == ref[i];
    if (!ok) throw ShapeError("concat_channels: " + to_string(s) + " incompatible with " + to_string(ref));
    total_c += s[1];
  }
  const std::size_t n = ref[0];
  const std::size_t inner = numel(ref) / (ref[0] * ref[1]);
  Shape shape = ref;
  shape[1] = total_c;
  std::vector<T> out(n * total_c * inner);
  std::vector<std::size_t> offsets;
  std::vector<detail::Node<T>*> nodes;
  std::size_t off = 0;
  for (const auto& p : present) {
    const std::size_t pc = p.dim(1);
    auto in = p.data();
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(in.data() + b * pc * inner, pc * inner, out.data() + (b * total_c + off) * inner);
    offsets.push_back(off);
    nodes.push_back(p.node().get());
    off += pc;
  }
  return make_result<T>(shape, std::move(out), present, "concat_channels", [=](Node<T>* self) {
    return [=] {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        auto* pn = nodes[k];
        if (!pn->requires_grad) continue;
        const std::size_t pc = pn->shape[1];
        auto& g = pn->grad_buffer();
        for (std::size_t b = 0; b < n; ++b) {
          const T* src = self->grad.data() + (b * total_c + offsets[k]) * inner;
          T* dst = g.data() + b * pc * inner;
          for (std::size_t i = 0; i < pc * inner; ++i) dst[i] += src[i];
        }
      }
    };
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  return concat_channels(std::vector<Tensor<T>>{a, b});
}

template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, std::size_t groups) {
  require_defined(x, "channel_shuffle");
  const std::size_t c = x.dim(1);
  if (groups == 0 || c % groups != 0) {
    throw ShapeError("channel_shuffle: " + std::to_string(c) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  }
  const std::size_t n = x.dim(0), inner = x.numel() / (n * c), per = c / groups;
  std::vector<std::size_t> src(c);
  for (std::size_t k = 0; k < c; ++k) src[k] = (k % groups) * per + k / groups;
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < c; ++k)
      std::copy_n(in.data() + (b * c + src[k]) * inner, inner, out.data() + (b * c + k) * inner);
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {x}, "channel_shuffle", [=](Node<T>* self) {
    return [=] {
      auto& g = xn->grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
          T* dst = g.data() + (b * c + src[k]) * inner;
          const T* s = self->grad.data() + (b * c + k) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += s[i];
        }
    };
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require_defined(x, "reshape");
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  auto in = x.data();
  std::vector<T> out(in.begin(), in.end());
  auto* xn = x.node().get();
  return make_result<T>(std::move(shape), std::move(out), {x}, "reshape", [xn](Node<T>* self) {
    return [xn, self] {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i];
    };
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  require_defined(x, "permute");
  const std::size_t r = x.rank();
  if (perm.size() != r) throw ShapeError("permute: permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  const Shape& in_shape = x.shape();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[perm[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * in_shape[i];
  // source offset for each destination element, walked with an odometer
  std::vector<std::size_t> src(x.numel());
  std::vector<std::size_t> idx(r, 0);
  std::size_t offset = 0;
  for (std::size_t o = 0; o < src.size(); ++o) {
    src[o] = offset;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      offset += in_strides[perm[d]];
      if (idx[d] < out_shape[d]) break;
      offset -= in_strides[perm[d]] * out_shape[d];
      idx[d] = 0;
    }
  }
  auto in = x.data();
  std::vector<T> out(src.size());
  for (std::size_t o = 0; o < src.size(); ++o) out[o] = in[src[o]];
  auto* xn = x.node().get();
  return make_result<T>(out_shape, std::move(out), {x}, "permute", [xn, src = std::move(src)](Node<T>* self) mutable {
    return [xn, self, src = std::move(src)] {
      auto& g = xn->grad_buffer();
      for (std::size_t o = 0; o < src.size(); ++o) g[src[o]] += self->grad[o];
    };
  });
}

#define LVSR_INSTANTIATE_OPS(T)                                                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                 \
  template Tensor<T> tanh(const Tensor<T>&);                                                                    \
  template Tensor<T> activate(const Tensor<T>&, Activation);                                                    \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                                    \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                                                  \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);                                        \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                                    \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> cross_entropy(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>);                             \
  template Tensor<T> avg_pool(const Tensor<T>&, const std::vector<std::size_t>&, const std::vector<std::size_t>&); \
  template Tensor<T> max_pool(const Tensor<T>&, const std::vector<std::size_t>&, const std::vector<std::size_t>&, \
                              const std::vector<std::size_t>&);                                                 \
  template Tensor<T> global_avg_pool_spatial(const Tensor<T>&);                                                 \
  template Tensor<T> upsample_nearest(const Tensor<T>&, const std::vector<std::size_t>&);                       \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, double);                            \
  template std::pair<Tensor<T>, Tensor<T>> split_channels_at(const Tensor<T>&, std::size_t);                    \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                            \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> channel_shuffle(const Tensor<T>&, std::size_t);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                          \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);

LVSR_INSTANTIATE_OPS(float)
LVSR_INSTANTIATE_OPS(double)

}  // namespace lvsr
