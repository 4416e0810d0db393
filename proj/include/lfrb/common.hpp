#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lfrb {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Wide accumulator for Gram data and bound evaluation. The closed-form
// error bound subtracts nearly equal quantities; binary64 storage alone
// cannot resolve bound values near the support points.
using Accum = long double;
using AccumMatrix = Eigen::Matrix<Accum, Eigen::Dynamic, Eigen::Dynamic>;
using AccumVector = Eigen::Matrix<Accum, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Invalid configuration, spec file, or argument. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (singular or ill-conditioned system). CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// File or container format failure. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Compensated accumulation
// ---------------------------------------------------------------------------

/// Kahan-compensated accumulator in extended precision.
class KahanAccumulator {
public:
    void add(Accum term) {
        const Accum y = term - compensation_;
        const Accum t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    [[nodiscard]] Accum value() const { return sum_; }

private:
    Accum sum_ = 0.0L;
    Accum compensation_ = 0.0L;
};

/// Compensated dot product of two equally sized buffers.
inline Accum compensated_dot(const double* a, const double* b, Index n) {
    KahanAccumulator acc;
    for (Index i = 0; i < n; ++i) {
        acc.add(static_cast<Accum>(a[i]) * static_cast<Accum>(b[i]));
    }
    return acc.value();
}

/// Compensated Frobenius inner product of two matrices of identical shape.
inline Accum frobenius_dot(const Matrix& a, const Matrix& b) {
    return compensated_dot(a.data(), b.data(), a.size());
}

// ---------------------------------------------------------------------------
// Parallel map
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
///
/// Each index is processed exactly once and must write only to its own
/// output slot, so results are identical for any worker count. The first
/// exception thrown by a worker is rethrown on the calling thread.
inline void parallel_for(Index count, int jobs, const std::function<void(Index)>& fn) {
    if (count <= 0) return;
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    const int workers = static_cast<int>(std::min<Index>(jobs, count));
    if (workers == 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }

    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            const Index begin = count * w / workers;
            const Index end = count * (w + 1) / workers;
            for (Index i = begin; i < end; ++i) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Deterministic random numbers
// ---------------------------------------------------------------------------

/// Seeded generator with fixed algorithms for uniform and normal draws.
/// std::<distribution> implementations vary across standard libraries, so the
/// transforms are spelled out here to keep generated models reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // xorshift* variant; period 2^64 - 1, passes the usual batteries.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform draw in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform index in [0, n).
    Index uniform_index(Index n) {
        return static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// k distinct indices from [0, n), by partial Fisher-Yates shuffle.
    std::vector<Index> sample_without_replacement(Index n, Index k) {
        std::vector<Index> pool(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<Index> out;
        out.reserve(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i) {
            const Index j = i + uniform_index(n - i);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            out.push_back(pool[static_cast<std::size_t>(i)]);
        }
        return out;
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Small formatting helpers
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips a binary64 value.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = std::strtod(buf, nullptr);
    if (parsed == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            if (std::strtod(shorter, nullptr) == v) return shorter;
        }
    }
    return buf;
}

inline std::string join_doubles(const std::vector<double>& values, const char* sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += sep;
        out += format_double(values[i]);
    }
    return out;
}

/// FNV-1a over a byte string; used for grid/provenance ids.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace lfrb
