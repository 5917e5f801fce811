#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "lvsr/tensor.hpp"

namespace lvsr::detail {

/// Trailing spatial extents right-aligned into (d, h, w); missing axes are 1.
struct Extent3 {
  std::size_t d = 1, h = 1, w = 1;
  std::size_t size() const { return d * h * w; }
};

inline Extent3 extent_from(const Shape& shape, std::size_t first_axis = 2) {
  Extent3 e;
  const std::size_t n = shape.size() - first_axis;
  std::array<std::size_t*, 3> slots{&e.d, &e.h, &e.w};
  for (std::size_t i = 0; i < n; ++i) *slots[3 - n + i] = shape[first_axis + i];
  return e;
}

inline std::array<std::size_t, 3> align3(const std::vector<std::size_t>& v, std::size_t fill) {
  std::array<std::size_t, 3> out{fill, fill, fill};
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) out[3 - n + i] = v[i];
  return out;
}

}  // namespace lvsr::detail
