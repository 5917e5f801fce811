#pragma once

#include <gtest/gtest.h>

#include <vector>

#include "lvsr/random.hpp"
#include "lvsr/tensor.hpp"

namespace lvsr::test {

template <typename T = float>
Tensor<T> make(Shape shape, std::vector<T> values, bool requires_grad = false) {
  Tensor<T> t(std::move(shape), std::move(values));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T = float>
Tensor<T> randn(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return make<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
std::vector<T> values(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

template <typename T>
std::vector<T> grads(const Tensor<T>& t) {
  return {t.grad().begin(), t.grad().end()};
}

}  // namespace lvsr::test
