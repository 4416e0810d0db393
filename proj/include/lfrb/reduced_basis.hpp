#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/numerics.hpp"

#include <limits>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Support basis
// ---------------------------------------------------------------------------

/// One row of the greedy selection trace: the state after a sweep with
/// n_supports active support points.
struct TraceEntry {
    Index n_supports = 0;
    double max_rel_upper_bound = 0.0;
    Index argmax_index = -1;            ///< grid sample maximizing the bound
    ConductivityPoint argmax_sigma;
    double gram_min_eig_ratio = 0.0;    ///< min eigenvalue of Gram / trace
    bool any_regularized = false;       ///< a per-sample solve hit the cutoff
};

/// Offline product of support selection: support points, their reduced rows,
/// Gram data, and the precomputed per-support lead-field blocks
/// support_fields[i][j] = rows_i * Dbar_j. Immutable once built.
struct SupportBasis {
    SystemInfo info;
    std::vector<ConductivityPoint> supports;
    std::vector<ReducedRows> reduced;            ///< empty when loaded online-only
    GramData gram;
    std::vector<std::vector<Matrix>> support_fields;  ///< [support][d-component]
    std::vector<GridAxis> domain;                ///< bounds used for selection
    std::string grid_id;
    std::vector<TraceEntry> trace;
    std::string stop_reason;

    [[nodiscard]] Index size() const { return static_cast<Index>(supports.size()); }

    [[nodiscard]] bool in_domain(const ConductivityPoint& sigma) const {
        if (domain.empty() || sigma.size() != static_cast<Index>(domain.size())) return true;
        for (std::size_t d = 0; d < domain.size(); ++d) {
            if (sigma[static_cast<Index>(d)] < domain[d].lo ||
                sigma[static_cast<Index>(d)] > domain[d].hi) {
                return false;
            }
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Greedy configuration
// ---------------------------------------------------------------------------

/// Stop rules and initialization for support selection. At least one stop
/// rule must be active. Ties in the per-sweep argmax break toward the lowest
/// grid index, which keeps runs reproducible.
struct GreedyConfig {
    enum class Init { Corners, Center, Explicit };

    Init init = Init::Corners;
    std::vector<ConductivityPoint> explicit_supports;  ///< for Init::Explicit

    double eps_abs = 1e-6;     ///< stop when max relative bound falls below; <=0 disables
    double eps_delta = 0.0;    ///< stop when the max-bound decrease falls below; <=0 disables
    Index max_supports = 30;   ///< hard cap on supports; <=0 disables

    int jobs = 0;              ///< worker threads for sweeps and Gram extension
};

namespace detail {

inline std::vector<Index> initial_support_indices(const ConductivityGrid& grid,
                                                  const GreedyConfig& cfg) {
    std::vector<Index> out;
    switch (cfg.init) {
        case GreedyConfig::Init::Center: {
            std::vector<Index> mid(static_cast<std::size_t>(grid.n_axes()));
            for (Index d = 0; d < grid.n_axes(); ++d) {
                mid[static_cast<std::size_t>(d)] = grid.axes()[static_cast<std::size_t>(d)].count / 2;
            }
            out.push_back(grid.flat_index(mid));
            break;
        }
        case GreedyConfig::Init::Corners: {
            // Cross product of {first, last} index over the varying axes.
            std::vector<Index> varying;
            for (Index d = 0; d < grid.n_axes(); ++d) {
                if (grid.axes()[static_cast<std::size_t>(d)].count > 1) varying.push_back(d);
            }
            const Index combos = Index(1) << varying.size();
            for (Index c = 0; c < combos; ++c) {
                std::vector<Index> idx(static_cast<std::size_t>(grid.n_axes()), 0);
                for (std::size_t v = 0; v < varying.size(); ++v) {
                    if (c & (Index(1) << v)) {
                        const Index d = varying[v];
                        idx[static_cast<std::size_t>(d)] =
                            grid.axes()[static_cast<std::size_t>(d)].count - 1;
                    }
                }
                out.push_back(grid.flat_index(idx));
            }
            break;
        }
        case GreedyConfig::Init::Explicit: {
            if (cfg.explicit_supports.empty()) {
                throw ConfigError("explicit initialization needs at least one support point");
            }
            for (const auto& sigma : cfg.explicit_supports) {
                const Index i = grid.index_of(sigma);
                if (i < 0) {
                    throw ConfigError("initial support " + sigma.to_string() +
                                      " is not a grid sample");
                }
                out.push_back(i);
            }
            break;
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Per-sample relative upper bounds for the current Gram state.
inline std::vector<double> sweep_bounds(const GramData& gram, const SystemInfo& info,
                                        const ConductivityGrid& grid, Index n_limit, int jobs,
                                        bool* any_regularized = nullptr) {
    std::vector<double> bounds(static_cast<std::size_t>(grid.size()), 0.0);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(grid.size()), 0);
    parallel_for(grid.size(), jobs, [&](Index s) {
        const CoefficientSolution sol = solve_coefficients(gram, info, grid[s], n_limit);
        bounds[static_cast<std::size_t>(s)] = sol.relative_upper_bound;
        flags[static_cast<std::size_t>(s)] = sol.regularized ? 1 : 0;
    });
    if (any_regularized) {
        *any_regularized = false;
        for (std::uint8_t f : flags) {
            if (f) *any_regularized = true;
        }
    }
    return bounds;
}

inline Index argmax_lowest_index(const std::vector<double>& values) {
    Index best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<Index>(i);
    }
    return best;
}

inline double gram_min_eig_ratio(const GramData& gram) {
    if (gram.n_supports == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<AccumMatrix> es(gram.gram, Eigen::EigenvaluesOnly);
    const Accum trace = gram.gram.trace();
    if (!(trace > 0)) return 0.0;
    return static_cast<double>(es.eigenvalues()[0] / trace);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Greedy support selection
// ---------------------------------------------------------------------------

/// Iteratively grows the support set: sweep the grid, add the sample with the
/// largest relative upper bound (ties toward the lowest index), extend the
/// Gram data and the precomputed field blocks, repeat until a stop rule fires.
/// Deterministic for fixed inputs, for any worker count.
inline SupportBasis select_supports(const ParametrizedSystem& sys, const ConductivityGrid& grid,
                                    const GreedyConfig& cfg) {
    if (grid.size() == 0) throw ConfigError("support selection needs a nonempty grid");
    if (cfg.eps_abs <= 0 && cfg.eps_delta <= 0 && cfg.max_supports <= 0) {
        throw ConfigError("at least one stop rule must be active");
    }
    const Index cap = cfg.max_supports > 0 ? std::min<Index>(cfg.max_supports, grid.size())
                                           : grid.size();

    SupportBasis basis;
    basis.info = sys.info();
    basis.domain = grid.axes();
    basis.grid_id = grid.id();

    std::vector<Index> support_indices;
    auto add_support = [&](Index grid_index) {
        const ConductivityPoint& sigma = grid[grid_index];
        ReducedRows rows = compute_reduced_rows(sys, sigma);
        basis.gram = extend_gram(basis.gram, sys, basis.reduced, rows, cfg.jobs);
        std::vector<Matrix> fields;
        fields.reserve(sys.d_components.size());
        for (const auto& d : sys.d_components) {
            fields.emplace_back(rows.rows * d.matrix);
        }
        basis.support_fields.push_back(std::move(fields));
        basis.reduced.push_back(std::move(rows));
        basis.supports.push_back(sigma);
        support_indices.push_back(grid_index);
    };

    for (Index idx : detail::initial_support_indices(grid, cfg)) {
        if (static_cast<Index>(basis.supports.size()) >= cap) break;
        add_support(idx);
    }

    double previous_max = std::numeric_limits<double>::infinity();
    while (true) {
        TraceEntry entry;
        entry.n_supports = basis.size();
        std::vector<double> bounds =
            detail::sweep_bounds(basis.gram, basis.info, grid, -1, cfg.jobs,
                                 &entry.any_regularized);
        entry.argmax_index = detail::argmax_lowest_index(bounds);
        entry.max_rel_upper_bound = bounds[static_cast<std::size_t>(entry.argmax_index)];
        entry.argmax_sigma = grid[entry.argmax_index];
        entry.gram_min_eig_ratio = detail::gram_min_eig_ratio(basis.gram);
        basis.trace.push_back(entry);

        if (cfg.eps_abs > 0 && entry.max_rel_upper_bound < cfg.eps_abs) {
            basis.stop_reason = "eps_abs";
            break;
        }
        if (cfg.eps_delta > 0 && std::abs(previous_max - entry.max_rel_upper_bound) < cfg.eps_delta) {
            basis.stop_reason = "eps_delta";
            break;
        }
        if (basis.size() >= cap) {
            basis.stop_reason = basis.size() >= grid.size() ? "grid_exhausted" : "max_supports";
            break;
        }
        if (entry.max_rel_upper_bound == 0.0) {
            // Every grid sample is represented exactly; nothing left to add.
            basis.stop_reason = "exact";
            break;
        }
        if (std::find(support_indices.begin(), support_indices.end(), entry.argmax_index) !=
            support_indices.end()) {
            // The worst sample is already a support: the sweep has collapsed
            // to the rounding floor everywhere.
            basis.stop_reason = "converged_at_support";
            break;
        }
        previous_max = entry.max_rel_upper_bound;
        add_support(entry.argmax_index);
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Online approximation
// ---------------------------------------------------------------------------

/// Approximated lead field with its coefficient solution. `out_of_domain`
/// marks queries outside the selection domain; they are answered anyway.
struct Approximation {
    Matrix leadfield;
    CoefficientSolution solution;
    bool out_of_domain = false;
};

/// Approximates the lead field at sigma from the precomputed basis:
/// solve for the coefficients, then accumulate
/// sum_i sum_j c_i * lambda_j(sigma) * support_fields[i][j].
/// Touches no n_unknowns-sized data, so the cost is independent of head-model
/// size. Restricting to the first n_limit supports reproduces the state of
/// the selection after n_limit additions.
inline Approximation approximate(const SupportBasis& basis, const ConductivityPoint& sigma,
                                 Index n_limit = -1) {
    const Index n = (n_limit < 0) ? basis.size() : std::min(n_limit, basis.size());
    if (n < 1) throw ConfigError("approximation requires a nonempty basis");

    Approximation out;
    out.solution = solve_coefficients(basis.gram, basis.info, sigma, n);
    out.out_of_domain = !basis.in_domain(sigma);

    out.leadfield = Matrix::Zero(basis.info.n_electrodes, basis.info.n_sources);
    const Index n_d = basis.info.n_d();
    for (Index j = 0; j < n_d; ++j) {
        const double lambda = basis.info.d_multipliers[static_cast<std::size_t>(j)].evaluate(sigma);
        if (lambda == 0.0) continue;
        for (Index i = 0; i < n; ++i) {
            const double c = out.solution.coefficients[i] * lambda;
            if (c == 0.0) continue;
            out.leadfield.noalias() +=
                c * basis.support_fields[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return out;
}

/// Convenience overload validating the query against a system.
inline Approximation approximate(const SupportBasis& basis, const ParametrizedSystem& sys,
                                 const ConductivityPoint& sigma, Index n_limit = -1) {
    sys.info().check_point(sigma);
    return approximate(basis, sigma, n_limit);
}

// ---------------------------------------------------------------------------
// Error sweeps
// ---------------------------------------------------------------------------

/// Per-sample sweep of the relative upper bound, optionally with the true
/// relative error against freshly computed exact lead fields. The exact
/// column exists for validation; it is never needed by the approximation.
struct ErrorSweep {
    std::vector<double> rel_upper_bound;
    std::vector<double> true_rel_error;  ///< empty unless with_exact
    std::vector<std::uint8_t> valid;
    double max_rel_upper_bound = 0.0;
    Index argmax_index = -1;
};

inline ErrorSweep error_sweep(const SupportBasis& basis, const ParametrizedSystem& sys,
                              const ConductivityGrid& grid, bool with_exact, int jobs = 0) {
    ErrorSweep out;
    out.valid.assign(static_cast<std::size_t>(grid.size()), 1);
    out.rel_upper_bound = detail::sweep_bounds(basis.gram, basis.info, grid, -1, jobs);
    if (with_exact) {
        out.true_rel_error.assign(static_cast<std::size_t>(grid.size()), 0.0);
        parallel_for(grid.size(), jobs, [&](Index s) {
            try {
                const Matrix exact = exact_lead_field(sys, grid[s]);
                const Approximation approx = approximate(basis, grid[s]);
                out.true_rel_error[static_cast<std::size_t>(s)] =
                    (exact - approx.leadfield).norm() / exact.norm();
            } catch (const NumericalError&) {
                out.valid[static_cast<std::size_t>(s)] = 0;
            }
        });
    }
    out.argmax_index = detail::argmax_lowest_index(out.rel_upper_bound);
    out.max_rel_upper_bound = out.rel_upper_bound[static_cast<std::size_t>(out.argmax_index)];
    return out;
}

/// Replay of the per-sample bound for every prefix length of the basis.
///
/// Gram extension only appends entries, so the leading blocks reproduce the
/// selection states bit-identically. With `monotone_envelope`, each step may
/// keep the previous step's coefficients (padded with a zero) when they give
/// the smaller evaluation: the padded vector is an admissible candidate whose
/// bound value is unchanged, which pins down the mathematical guarantee that
/// the optimal bound never increases, even at the rounding floor.
struct SweepTrace {
    Index n_first = 0;   ///< prefix length of the first row
    std::vector<std::vector<double>> rel_upper_bound;     ///< [step][sample]
    std::vector<std::vector<Vector>> coefficients;        ///< [step][sample]
};

inline SweepTrace sweep_trace(const SupportBasis& basis, const ConductivityGrid& grid,
                              Index n_first, bool monotone_envelope = false, int jobs = 0) {
    SweepTrace out;
    out.n_first = n_first;
    const Index steps = basis.size() - n_first + 1;
    if (steps < 1) throw ConfigError("sweep trace needs n_first <= basis size");
    out.rel_upper_bound.resize(static_cast<std::size_t>(steps));
    out.coefficients.resize(static_cast<std::size_t>(steps));
    for (Index step = 0; step < steps; ++step) {
        const Index n = n_first + step;
        auto& bounds = out.rel_upper_bound[static_cast<std::size_t>(step)];
        auto& coeffs = out.coefficients[static_cast<std::size_t>(step)];
        bounds.assign(static_cast<std::size_t>(grid.size()), 0.0);
        coeffs.assign(static_cast<std::size_t>(grid.size()), Vector());
        parallel_for(grid.size(), jobs, [&](Index s) {
            const CoefficientSolution sol = solve_coefficients(basis.gram, basis.info, grid[s], n);
            double value = sol.relative_upper_bound;
            Vector c = sol.coefficients;
            if (monotone_envelope && step > 0) {
                const double prev =
                    out.rel_upper_bound[static_cast<std::size_t>(step - 1)][static_cast<std::size_t>(s)];
                if (prev < value) {
                    value = prev;
                    c = Vector::Zero(n);
                    const Vector& prev_c =
                        out.coefficients[static_cast<std::size_t>(step - 1)][static_cast<std::size_t>(s)];
                    c.head(prev_c.size()) = prev_c;
                }
            }
            bounds[static_cast<std::size_t>(s)] = value;
            coeffs[static_cast<std::size_t>(s)] = std::move(c);
        });
    }
    return out;
}

}  // namespace lfrb
