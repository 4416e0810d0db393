#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/numerics.hpp"
#include "lfrb/reduced_basis.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <vector>

namespace lfrb {

inline double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

/// Median wall-clock seconds of fn over `reps` runs after one warm-up call.
inline double median_seconds(int reps, const std::function<void()>& fn) {
    fn();  // warm caches and lazy allocations
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return median(std::move(times));
}

namespace detail {
/// Keeps results observable so timed calls are not optimized away.
inline void consume(double value) {
    static volatile double sink = 0.0;
    sink = value;
}
}  // namespace detail

/// Median per-point time of the exact lead-field path over a set of queries.
inline double measure_exact_per_sigma(const ParametrizedSystem& sys,
                                      const std::vector<ConductivityPoint>& sigmas, int reps) {
    std::vector<double> times;
    for (const ConductivityPoint& sigma : sigmas) {
        times.push_back(
            median_seconds(reps, [&]() { detail::consume(exact_lead_field(sys, sigma)(0, 0)); }));
    }
    return median(std::move(times));
}

/// Median per-point time of the online approximation over a set of queries.
inline double measure_online_per_sigma(const SupportBasis& basis,
                                       const std::vector<ConductivityPoint>& sigmas, int reps) {
    std::vector<double> times;
    for (const ConductivityPoint& sigma : sigmas) {
        times.push_back(median_seconds(
            reps, [&]() { detail::consume(approximate(basis, sigma).leadfield(0, 0)); }));
    }
    return median(std::move(times));
}

}  // namespace lfrb
