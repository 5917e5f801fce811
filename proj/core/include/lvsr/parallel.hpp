#pragma once

#include <cstddef>
#include <functional>

namespace lvsr {

/// Worker count for tensor kernels. Reads LITE_VSR_THREADS on first use; defaults to 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [begin, end). Each index is owned by exactly one worker, so
/// results never depend on the worker count.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn);

}  // namespace lvsr
