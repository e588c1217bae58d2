#pragma once

#include <cstdlib>
#include <string>
#include <thread>

namespace escnet {

// Worker count for parallel kernels. Controlled by the ESCNET_THREADS
// environment variable; defaults to the hardware thread count. Every
// parallel loop in the engine assigns each output element to exactly one
// worker, so results do not depend on this value.
inline int& worker_count_slot() {
    static int n = [] {
        if (const char* env = std::getenv("ESCNET_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return n;
}

inline int worker_count() { return worker_count_slot(); }

inline void set_worker_count(int n) {
    if (n > 0) worker_count_slot() = n;
}

} // namespace escnet
