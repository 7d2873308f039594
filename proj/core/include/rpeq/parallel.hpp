#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rpeq {

// Paths are processed in fixed-size blocks. Reductions accumulate one partial
// per block and sum the partials in block order, so results do not depend on
// how blocks are spread over threads.
inline constexpr std::size_t kBlockSize = 4096;

std::size_t block_count(std::size_t n);

// 0 means "use hardware concurrency".
std::size_t resolve_threads(std::size_t requested);

// Calls fn(block, begin, end) once per block.
void for_blocks(std::size_t n, std::size_t threads,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Deterministic sum of f(i) over [0, n).
double block_sum(std::size_t n, std::size_t threads,
                 const std::function<double(std::size_t)>& f);

double block_mean(const double* x, std::size_t n, std::size_t threads);

}  // namespace rpeq
