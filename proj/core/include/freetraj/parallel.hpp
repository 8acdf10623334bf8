#pragma once

#include <cstddef>
#include <functional>

namespace freetraj {

/// Worker count used by parallel_for. Defaults to 1; 0 means hardware
/// concurrency.
void set_thread_count(std::size_t n);
[[nodiscard]] std::size_t thread_count();

/// Runs body(k) for k in [begin, end), split into contiguous chunks. Every
/// index is evaluated exactly once by exactly one worker; bodies must write
/// to disjoint outputs, which keeps results independent of the worker count.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body);

}  // namespace freetraj
