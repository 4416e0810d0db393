#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/numerics.hpp"
#include "lfrb/reduced_basis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Single-dipole fitting
// ---------------------------------------------------------------------------

/// Best single-source fit to one or more topographies.
struct FitResult {
    double r_value = 0.0;                ///< residual of the best fit
    Index best_source = -1;
    std::vector<double> best_amplitudes; ///< one per time sample
    ConductivityPoint sigma;             ///< filled by map sweeps
};

/// Best single-column fit to one topography: per column the optimal amplitude
/// is closed-form (zero column -> amplitude 0); the residual is evaluated
/// directly so the stored value always matches a recomputation. Ties break
/// toward the lowest column index.
inline FitResult fit_single(const Vector& y, const Matrix& lead) {
    if (y.size() != lead.rows()) {
        throw ConfigError("topography length " + std::to_string(y.size()) +
                          " does not match electrode count " + std::to_string(lead.rows()));
    }
    FitResult out;
    out.r_value = y.norm();  // amplitude 0 is always admissible
    out.best_source = 0;
    out.best_amplitudes = {0.0};
    for (Index j = 0; j < lead.cols(); ++j) {
        const double q = lead.col(j).squaredNorm();
        const double a = q > 0.0 ? y.dot(lead.col(j)) / q : 0.0;
        const double r = (y - a * lead.col(j)).norm();
        if (r < out.r_value) {
            out.r_value = r;
            out.best_source = j;
            out.best_amplitudes = {a};
        }
    }
    return out;
}

/// Best shared-source fit to T topographies (columns of `samples`): one
/// source column serves all samples, each with its own optimal amplitude;
/// the score is the sum of per-sample residual norms. Reduces to fit_single
/// at T = 1.
inline FitResult fit_multi(const Matrix& samples, const Matrix& lead) {
    if (samples.cols() < 1) throw ConfigError("multi-sample fit needs at least one topography");
    if (samples.rows() != lead.rows()) {
        throw ConfigError("topography length does not match electrode count");
    }
    const Index t_count = samples.cols();
    FitResult out;
    out.best_source = 0;
    out.best_amplitudes.assign(static_cast<std::size_t>(t_count), 0.0);
    double best_score = 0.0;
    for (Index t = 0; t < t_count; ++t) best_score += samples.col(t).norm();
    out.r_value = best_score;

    std::vector<double> amplitudes(static_cast<std::size_t>(t_count));
    for (Index j = 0; j < lead.cols(); ++j) {
        const double q = lead.col(j).squaredNorm();
        double score = 0.0;
        for (Index t = 0; t < t_count; ++t) {
            const double a = q > 0.0 ? samples.col(t).dot(lead.col(j)) / q : 0.0;
            amplitudes[static_cast<std::size_t>(t)] = a;
            score += (samples.col(t) - a * lead.col(j)).norm();
        }
        if (score < out.r_value) {
            out.r_value = score;
            out.best_source = j;
            out.best_amplitudes = amplitudes;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Data-fit error maps
// ---------------------------------------------------------------------------

enum class MapNormalization { Raw, MinNormalized };

enum class LeadfieldMode { Exact, Approximate };

/// Data-fitting residual over a conductivity grid. Invalid samples mark
/// per-point solve failures; they are skipped, not fatal.
struct DataFitMap {
    ConductivityGrid grid;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    std::vector<Index> best_source;
    MapNormalization normalization = MapNormalization::Raw;
};

/// Computes the best-single-source residual per grid sample, using exact
/// lead fields or basis approximations. `data` holds one topography per
/// column. Deterministic for any worker count.
inline DataFitMap error_map(const ParametrizedSystem& sys, const ConductivityGrid& grid,
                            const Matrix& data, LeadfieldMode mode,
                            const SupportBasis* basis = nullptr, Index n_limit = -1,
                            MapNormalization normalization = MapNormalization::Raw,
                            int jobs = 0) {
    if (mode == LeadfieldMode::Approximate && basis == nullptr) {
        throw ConfigError("approximate-mode error map needs a basis");
    }
    DataFitMap out;
    out.grid = grid;
    out.values.assign(static_cast<std::size_t>(grid.size()), 0.0);
    out.valid.assign(static_cast<std::size_t>(grid.size()), 1);
    out.best_source.assign(static_cast<std::size_t>(grid.size()), -1);
    out.normalization = normalization;

    parallel_for(grid.size(), jobs, [&](Index s) {
        try {
            Matrix lead;
            if (mode == LeadfieldMode::Exact) {
                lead = exact_lead_field(sys, grid[s]);
            } else {
                lead = approximate(*basis, grid[s], n_limit).leadfield;
            }
            const FitResult fit =
                data.cols() == 1 ? fit_single(Vector(data.col(0)), lead) : fit_multi(data, lead);
            out.values[static_cast<std::size_t>(s)] = fit.r_value;
            out.best_source[static_cast<std::size_t>(s)] = fit.best_source;
        } catch (const NumericalError&) {
            out.valid[static_cast<std::size_t>(s)] = 0;
        }
    });

    if (normalization == MapNormalization::MinNormalized) {
        double min_value = 0.0;
        bool found = false;
        for (Index s = 0; s < grid.size(); ++s) {
            if (!out.valid[static_cast<std::size_t>(s)]) continue;
            if (!found || out.values[static_cast<std::size_t>(s)] < min_value) {
                min_value = out.values[static_cast<std::size_t>(s)];
                found = true;
            }
        }
        if (!found) throw NumericalError("error map has no valid samples to normalize");
        if (min_value > 0.0) {
            for (Index s = 0; s < grid.size(); ++s) {
                if (out.valid[static_cast<std::size_t>(s)]) {
                    out.values[static_cast<std::size_t>(s)] /= min_value;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conductivity estimation
// ---------------------------------------------------------------------------

/// Conditional minimum along the remaining axes for one value of the first
/// varying axis.
struct ProfileEntry {
    double axis_value = 0.0;
    Index sample_index = -1;
    double value = 0.0;
    ConductivityPoint sigma;
};

struct ConductivityEstimate {
    ConductivityPoint sigma_hat;
    Index argmin_index = -1;
    double min_value = 0.0;
    bool flat = false;  ///< value spread below resolution; argmin is arbitrary
    std::vector<ProfileEntry> profile;
};

/// Global argmin of the map (ties toward the lowest index) plus, for each
/// value of the first varying axis, the argmin over the remaining axes.
inline ConductivityEstimate estimate_conductivity(const DataFitMap& map) {
    const ConductivityGrid& grid = map.grid;
    ConductivityEstimate out;
    double max_value = 0.0;
    bool any = false;
    for (Index s = 0; s < grid.size(); ++s) {
        if (!map.valid[static_cast<std::size_t>(s)]) continue;
        const double v = map.values[static_cast<std::size_t>(s)];
        if (!any) {
            out.argmin_index = s;
            out.min_value = v;
            max_value = v;
            any = true;
            continue;
        }
        if (v < out.min_value) {
            out.argmin_index = s;
            out.min_value = v;
        }
        if (v > max_value) max_value = v;
    }
    if (!any) throw NumericalError("error map has no valid samples");
    out.sigma_hat = grid[out.argmin_index];
    out.flat = (max_value - out.min_value) <= 1e-12 * std::max(1.0, std::abs(max_value));

    const Index axis = grid.first_varying_axis();
    if (axis >= 0) {
        const std::vector<double> axis_vals = grid.axis_values(axis);
        // Stride pattern of the flat row-major index along `axis`.
        Index inner = 1;
        for (Index d = axis + 1; d < grid.n_axes(); ++d) {
            inner *= grid.axes()[static_cast<std::size_t>(d)].count;
        }
        const Index axis_count = grid.axes()[static_cast<std::size_t>(axis)].count;
        const Index outer = grid.size() / (inner * axis_count);
        for (Index k = 0; k < axis_count; ++k) {
            ProfileEntry entry;
            entry.axis_value = axis_vals[static_cast<std::size_t>(k)];
            for (Index o = 0; o < outer; ++o) {
                for (Index i = 0; i < inner; ++i) {
                    const Index s = (o * axis_count + k) * inner + i;
                    if (!map.valid[static_cast<std::size_t>(s)]) continue;
                    const double v = map.values[static_cast<std::size_t>(s)];
                    if (entry.sample_index < 0 || v < entry.value) {
                        entry.sample_index = s;
                        entry.value = v;
                    }
                }
            }
            if (entry.sample_index >= 0) entry.sigma = grid[entry.sample_index];
            out.profile.push_back(std::move(entry));
        }
    }
    return out;
}

}  // namespace lfrb
