#pragma once

// Thin wrapper over the OpenMP runtime. Every kernel that uses a parallel
// loop produces results that are bit-identical regardless of thread count:
// work is split across independent output rows, never across a reduction.

namespace mrtts::parallel {

bool available();
int max_threads();
void set_num_threads(int n);

// Restores the previous thread limit on destruction.
class ScopedThreads {
public:
    explicit ScopedThreads(int n) : previous_(max_threads()) { set_num_threads(n); }
    ~ScopedThreads() { set_num_threads(previous_); }
    ScopedThreads(const ScopedThreads&) = delete;
    ScopedThreads& operator=(const ScopedThreads&) = delete;

private:
    int previous_;
};

// Loops shorter than this run serially; fork/join costs more than the work.
inline constexpr long kMinParallelRows = 32;

}  // namespace mrtts::parallel
