#pragma once

#include <bn2mf.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace cli {

// Owning wrapper over a C handle; out() yields a slot for the create calls.
template <typename T, void (*Free)(T*)>
class Owned {
  public:
    Owned() = default;
    explicit Owned(T* p) : ptr_(p) {}
    ~Owned() { reset(); }
    Owned(Owned&& o) noexcept : ptr_(o.release()) {}
    Owned& operator=(Owned&& o) noexcept {
        if (this != &o) reset(o.release());
        return *this;
    }
    Owned(const Owned&) = delete;
    Owned& operator=(const Owned&) = delete;

    T* get() const { return ptr_; }
    explicit operator bool() const { return ptr_ != nullptr; }
    T** out() {
        reset();
        return &ptr_;
    }
    T* release() {
        T* p = ptr_;
        ptr_ = nullptr;
        return p;
    }
    void reset(T* p = nullptr) {
        if (ptr_) Free(ptr_);
        ptr_ = p;
    }

  private:
    T* ptr_ = nullptr;
};

using Mat = Owned<bn2mf_matrix, bn2mf_matrix_free>;
using FitResult = Owned<bn2mf_result, bn2mf_result_free>;
using Intervals = Owned<bn2mf_intervals, bn2mf_intervals_free>;
using Sim = Owned<bn2mf_sim, bn2mf_sim_free>;
using Baseline = Owned<bn2mf_baseline, bn2mf_baseline_free>;

// Exit contract: 0 success, 1 usage/input error, 2 numerical failure.
inline int exit_code_for(int status) { return status == BN2MF_ENUMERIC ? 2 : 1; }

struct CApiError {
    int status;
    std::string message;
};

inline void check(int status) {
    if (status != BN2MF_OK) throw CApiError{status, bn2mf_last_error()};
}

// SplitMix64, matching the library's stream derivation so CLI-chosen seeds are
// stable and well spread.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream + 0x517cc1b727220a95ULL));
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace cli
