#pragma once

#include <cstdint>

namespace lvsr {

/// Multiply-accumulates executed by conv and linear kernels since construction.
/// Used to cross-check the analytical cost model against real forward passes.
class MacCounter {
 public:
  MacCounter();
  std::uint64_t count() const;

 private:
  std::uint64_t start_;
};

namespace detail {
void record_macs(std::uint64_t n);
}

}  // namespace lvsr
