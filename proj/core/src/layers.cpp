#include "lvsr/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "lvsr/errors.hpp"

namespace lvsr {

Rng& ForwardContext::dropout_rng() const {
  if (rng == nullptr) throw std::logic_error("train-mode forward needs an Rng for dropout");
  return *rng;
}

void ForwardContext::throw_non_finite(const std::string& stage) {
  throw NumericError("non-finite values produced by " + stage);
}

template <typename T>
void ParameterRegistry<T>::add(const std::string& name, const Tensor<T>& tensor, bool trainable) {
  if (!tensor.defined()) throw std::logic_error("registry: undefined tensor " + name);
  if (!names_.insert(name).second) throw std::logic_error("registry: duplicate name " + name);
  if (!nodes_.insert(tensor.node().get()).second) {
    throw std::logic_error("registry: tensor registered twice (" + name + ")");
  }
  entries_.push_back({name, tensor, trainable});
}

template <typename T>
std::vector<Tensor<T>> ParameterRegistry<T>::trainable() const {
  std::vector<Tensor<T>> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.tensor);
  return out;
}

template <typename T>
std::size_t ParameterRegistry<T>::trainable_count() const {
  return trainable_count("");
}

template <typename T>
std::size_t ParameterRegistry<T>::trainable_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable && e.name.starts_with(prefix)) n += e.tensor.numel();
  return n;
}

template <typename T>
const NamedTensor<T>* ParameterRegistry<T>::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
void ParameterRegistry<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
Conv<T>::Conv(ConvDescriptor d, bool with_bias, Rng& rng) : desc(std::move(d)) {
  desc.validate();
  const Shape ws = desc.weight_shape();
  const double fan_in = static_cast<double>(desc.in_channels / desc.groups * desc.kernel_volume());
  const double std = std::sqrt(2.0 / fan_in);
  std::vector<T> w(numel(ws));
  for (auto& v : w) v = static_cast<T>(rng.normal(0.0, std));
  weight = Tensor<T>(ws, std::move(w));
  weight.set_requires_grad(true);
  if (with_bias) {
    bias = Tensor<T>(Shape{desc.out_channels}, T{0});
    bias.set_requires_grad(true);
  }
}

template <typename T>
Tensor<T> Conv<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) const {
  auto y = conv(x, desc, weight, bias);
  ctx.check(name, y);
  return y;
}

template <typename T>
void Conv<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  name = path;
  reg.add(path + ".weight", weight);
  if (bias.defined()) reg.add(path + ".bias", bias);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = batch_norm(x, state, ctx.mode);
  ctx.check(name, y);
  return y;
}

template <typename T>
void BatchNorm<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  name = path;
  reg.add(path + ".gamma", state.gamma);
  reg.add(path + ".beta", state.beta);
  reg.add(path + ".running_mean", state.running_mean, false);
  reg.add(path + ".running_var", state.running_var, false);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<T> w(in * out);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  weight = Tensor<T>(Shape{in, out}, std::move(w));
  weight.set_requires_grad(true);
  bias = Tensor<T>(Shape{out}, T{0});
  bias.set_requires_grad(true);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) const {
  auto y = linear(x, weight, bias);
  ctx.check(name, y);
  return y;
}

template <typename T>
void Linear<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  name = path;
  reg.add(path + ".weight", weight);
  reg.add(path + ".bias", bias);
}

template class ParameterRegistry<float>;
template class ParameterRegistry<double>;
template struct Conv<float>;
template struct Conv<double>;
template struct BatchNorm<float>;
template struct BatchNorm<double>;
template struct Linear<float>;
template struct Linear<double>;

}  // namespace lvsr
