#include "rpeq/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

namespace rpeq {

std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void for_blocks(std::size_t n, std::size_t threads,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t nb = block_count(n);
    const std::size_t nt = std::min(resolve_threads(threads), std::max<std::size_t>(nb, 1));
    auto run = [&](std::size_t tid) {
        for (std::size_t b = tid; b < nb; b += nt) {
            const std::size_t begin = b * kBlockSize;
            fn(b, begin, std::min(n, begin + kBlockSize));
        }
    };
    if (nt <= 1) {
        run(0);
        return;
    }
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t tid = 0; tid < nt; ++tid) {
        pool.emplace_back([&, tid] {
            try {
                run(tid);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

double block_sum(std::size_t n, std::size_t threads, const std::function<double(std::size_t)>& f) {
    std::vector<double> partial(block_count(n), 0.0);
    for_blocks(n, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += f(i);
        partial[b] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double block_mean(const double* x, std::size_t n, std::size_t threads) {
    if (n == 0) return 0.0;
    return block_sum(n, threads, [x](std::size_t i) { return x[i]; }) / static_cast<double>(n);
}

}  // namespace rpeq
