#include "lvsr/batch_norm.hpp"

#include <cmath>

#include "lvsr/errors.hpp"

namespace lvsr {

using detail::make_result;
using detail::Node;

template <typename T>
BatchNormState<T>::BatchNormState(std::size_t channels)
    : gamma(Shape{channels}, T{1}),
      beta(Shape{channels}, T{0}),
      running_mean(Shape{channels}, T{0}),
      running_var(Shape{channels}, T{1}) {
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, Mode mode) {
  if (x.rank() < 2) throw ShapeError("batch_norm: expected [N,C,...], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (c != state.channels()) {
    throw ShapeError("batch_norm: input has " + std::to_string(c) + " channels, state has " +
                     std::to_string(state.channels()));
  }
  const std::size_t inner = x.numel() / (n * c);
  const std::size_t count = n * inner;
  if (mode == Mode::kTrain && count < 2) {
    throw ShapeError("batch_norm: train mode needs more than one value per channel, got shape " +
                     to_string(x.shape()));
  }

  auto xv = x.data();
  auto gv = state.gamma.data();
  auto bv = state.beta.data();
  std::vector<T> mean(c), inv_std(c);
  if (mode == Mode::kTrain) {
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    const T m = static_cast<T>(state.momentum);
    for (std::size_t ch = 0; ch < c; ++ch) {
      T s{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const T mu = s / static_cast<T>(count);
      T ss{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const T var = ss / static_cast<T>(count);
      mean[ch] = mu;
      inv_std[ch] = T{1} / std::sqrt(var + static_cast<T>(state.epsilon));
      rm[ch] = (T{1} - m) * rm[ch] + m * mu;
      rv[ch] = (T{1} - m) * rv[ch] + m * (ss / static_cast<T>(count - 1));
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = rm[ch];
      inv_std[ch] = T{1} / std::sqrt(rv[ch] + static_cast<T>(state.epsilon));
    }
  }

  std::vector<T> xhat(x.numel()), out(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        xhat[base + i] = (xv[base + i] - mean[ch]) * inv_std[ch];
        out[base + i] = gv[ch] * xhat[base + i] + bv[ch];
      }
    }

  auto* xn = x.node().get();
  auto* gn = state.gamma.node().get();
  auto* bn = state.beta.node().get();
  const bool train = mode == Mode::kTrain;
  return make_result<T>(x.shape(), std::move(out), {x, state.gamma, state.beta}, "batch_norm",
                        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>* self) {
                          return [=] {
                            const auto& gy = self->grad;
                            std::vector<T> sum_dy(c, T{0}), sum_dy_xhat(c, T{0});
                            for (std::size_t b = 0; b < n; ++b)
                              for (std::size_t ch = 0; ch < c; ++ch) {
                                const std::size_t base = (b * c + ch) * inner;
                                for (std::size_t i = 0; i < inner; ++i) {
                                  sum_dy[ch] += gy[base + i];
                                  sum_dy_xhat[ch] += gy[base + i] * xhat[base + i];
                                }
                              }
                            if (gn->requires_grad) {
                              auto& g = gn->grad_buffer();
                              for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
                            }
                            if (bn->requires_grad) {
                              auto& g = bn->grad_buffer();
                              for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
                            }
                            if (!xn->requires_grad) return;
                            auto& gx = xn->grad_buffer();
                            const auto& gamma = gn->value;
                            const T inv_count = T{1} / static_cast<T>(count);
                            for (std::size_t b = 0; b < n; ++b)
                              for (std::size_t ch = 0; ch < c; ++ch) {
                                const std::size_t base = (b * c + ch) * inner;
                                const T k = gamma[ch] * inv_std[ch];
                                for (std::size_t i = 0; i < inner; ++i) {
                                  if (train) {
                                    gx[base + i] += k * (gy[base + i] - inv_count * sum_dy[ch] -
                                                         xhat[base + i] * inv_count * sum_dy_xhat[ch]);
                                  } else {
                                    gx[base + i] += k * gy[base + i];
                                  }
                                }
                              }
                          };
                        });
}

template struct BatchNormState<float>;
template struct BatchNormState<double>;
template Tensor<float> batch_norm(const Tensor<float>&, BatchNormState<float>&, Mode);
template Tensor<double> batch_norm(const Tensor<double>&, BatchNormState<double>&, Mode);

}  // namespace lvsr
