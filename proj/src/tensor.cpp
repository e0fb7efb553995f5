#include "wela/tensor.hpp"

#include <atomic>
#include <thread>

namespace wela {

namespace {
std::atomic<int> g_num_threads{1};
}

void set_num_threads(int n) { g_num_threads.store(n < 1 ? 1 : n); }

int num_threads() { return g_num_threads.load(); }

void parallel_for(index_t n, const std::function<void(index_t, index_t)>& fn) {
    const int nt = num_threads();
    if (nt <= 1 || n < 2 * nt) {
        fn(0, n);
        return;
    }
    const index_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        const index_t b = t * chunk;
        const index_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace wela
