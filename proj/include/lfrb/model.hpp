#pragma once

#include "lfrb/common.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Conductivity values
// ---------------------------------------------------------------------------

/// One conductivity configuration: a strictly positive value per compartment,
/// in S/m. Immutable after construction.
class ConductivityPoint {
public:
    ConductivityPoint() = default;

    explicit ConductivityPoint(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
                throw ConfigError("conductivity value " + std::to_string(i) +
                                  " must be strictly positive and finite, got " +
                                  format_double(values_[i]));
            }
        }
    }

    [[nodiscard]] Index size() const { return static_cast<Index>(values_.size()); }
    double operator[](Index i) const { return values_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }

    [[nodiscard]] std::string to_string() const { return "(" + join_doubles(values_, ", ") + ")"; }

    friend bool operator==(const ConductivityPoint& a, const ConductivityPoint& b) {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Multipliers
// ---------------------------------------------------------------------------

/// Scalar multiplier attached to one conductivity-independent component.
/// A sum of signed monomials c * sigma_k^p with p in {-1, 0, +1}; a term with
/// no compartment (or power 0) is a constant. This covers the multiplier
/// families that arise for nodal finite elements (sigma_k) and for symmetric
/// boundary elements (-sigma_k, 1/sigma_k, sigma_k + sigma_j, ...).
struct MultiplierSpec {
    struct Term {
        double coefficient = 0.0;
        Index compartment = -1;  ///< -1 means constant term
        int power = 1;           ///< -1, 0, or +1
    };

    std::vector<Term> terms;

    /// Evaluates the multiplier at a conductivity point. Pure: identical
    /// inputs produce bit-identical results.
    [[nodiscard]] double evaluate(const ConductivityPoint& sigma) const {
        double total = 0.0;
        for (const Term& t : terms) {
            if (t.compartment < 0 || t.power == 0) {
                total += t.coefficient;
                continue;
            }
            if (t.compartment >= sigma.size()) {
                throw ConfigError("multiplier references compartment " +
                                  std::to_string(t.compartment) + " but point has " +
                                  std::to_string(sigma.size()) + " compartments");
            }
            const double s = sigma[t.compartment];
            total += t.coefficient * (t.power > 0 ? s : 1.0 / s);
        }
        return total;
    }

    /// True if the spec is a single constant term.
    [[nodiscard]] bool is_constant() const {
        for (const Term& t : terms) {
            if (t.compartment >= 0 && t.power != 0) return false;
        }
        return true;
    }

    static MultiplierSpec constant(double c) { return {{Term{c, -1, 0}}}; }
    static MultiplierSpec linear(Index compartment, double c = 1.0) {
        return {{Term{c, compartment, 1}}};
    }
    static MultiplierSpec inverse(Index compartment, double c = 1.0) {
        return {{Term{c, compartment, -1}}};
    }
    static MultiplierSpec pair_sum(Index a, Index b) {
        return {{Term{1.0, a, 1}, Term{1.0, b, 1}}};
    }
};

// ---------------------------------------------------------------------------
// Parametrized system
// ---------------------------------------------------------------------------

/// A conductivity-independent matrix paired with its scalar multiplier.
struct SystemComponent {
    Matrix matrix;
    MultiplierSpec multiplier;
};

/// Rank-one shift c * w * w^T folded into the head-matrix decomposition to
/// remove the constant-vector kernel of a pure conservation-law assembly.
struct Deflation {
    Vector vector;        ///< w, unit norm
    double scale = 0.0;   ///< c > 0
    Index component = 0;  ///< index of the h_component equal to c * w * w^T
};

/// Dimension and multiplier metadata of a system; everything the online
/// pipeline needs, with no reference to any n_unknowns-sized matrix.
struct SystemInfo {
    Index n_unknowns = 0;
    Index n_electrodes = 0;
    Index n_sources = 0;
    Index n_compartments = 0;
    std::vector<MultiplierSpec> h_multipliers;
    std::vector<MultiplierSpec> d_multipliers;

    [[nodiscard]] Index n_h() const { return static_cast<Index>(h_multipliers.size()); }
    [[nodiscard]] Index n_d() const { return static_cast<Index>(d_multipliers.size()); }

    void check_point(const ConductivityPoint& sigma) const {
        if (sigma.size() != n_compartments) {
            throw ConfigError("conductivity point has " + std::to_string(sigma.size()) +
                              " entries, system expects " + std::to_string(n_compartments));
        }
    }
};

/// Discretized forward model with conductivity factored out:
/// head matrix = sum_i gamma_i(sigma) * Hbar_i, source matrix =
/// sum_j lambda_j(sigma) * Dbar_j, electrode selection S. Dense, row-major
/// on disk, binary64. Immutable after construction; safe to share across
/// threads.
struct ParametrizedSystem {
    Index n_unknowns = 0;
    Index n_electrodes = 0;
    Index n_sources = 0;
    Index n_compartments = 0;
    std::vector<SystemComponent> h_components;
    std::vector<SystemComponent> d_components;
    Matrix selection;  ///< n_electrodes x n_unknowns
    std::optional<Deflation> deflation;

    [[nodiscard]] SystemInfo info() const {
        SystemInfo out;
        out.n_unknowns = n_unknowns;
        out.n_electrodes = n_electrodes;
        out.n_sources = n_sources;
        out.n_compartments = n_compartments;
        out.h_multipliers.reserve(h_components.size());
        for (const auto& c : h_components) out.h_multipliers.push_back(c.multiplier);
        out.d_multipliers.reserve(d_components.size());
        for (const auto& c : d_components) out.d_multipliers.push_back(c.multiplier);
        return out;
    }

    void validate() const {
        if (h_components.empty()) throw ConfigError("system has no head-matrix components");
        if (d_components.empty()) throw ConfigError("system has no source-matrix components");
        for (const auto& c : h_components) {
            if (c.matrix.rows() != n_unknowns || c.matrix.cols() != n_unknowns) {
                throw ConfigError("head component has shape " + std::to_string(c.matrix.rows()) +
                                  "x" + std::to_string(c.matrix.cols()) + ", expected " +
                                  std::to_string(n_unknowns) + "x" + std::to_string(n_unknowns));
            }
        }
        for (const auto& c : d_components) {
            if (c.matrix.rows() != n_unknowns || c.matrix.cols() != n_sources) {
                throw ConfigError("source component shape mismatch");
            }
        }
        if (selection.rows() != n_electrodes || selection.cols() != n_unknowns) {
            throw ConfigError("selection matrix shape mismatch");
        }
        if (deflation) {
            if (deflation->component >= static_cast<Index>(h_components.size())) {
                throw ConfigError("deflation component index out of range");
            }
            if (!h_components[static_cast<std::size_t>(deflation->component)]
                     .multiplier.is_constant()) {
                throw ConfigError("deflation component must carry a constant multiplier");
            }
        }
    }
};

/// Assembles the head matrix at sigma: sum_i gamma_i(sigma) * Hbar_i.
/// The deflation component, when present, is one of the summands.
inline Matrix assemble_head(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    sys.info().check_point(sigma);
    Matrix out;
    for (const auto& c : sys.h_components) {
        const double g = c.multiplier.evaluate(sigma);
        if (out.size() == 0) {
            out = g * c.matrix;
        } else {
            out.noalias() += g * c.matrix;
        }
    }
    return out;
}

/// Assembles the source matrix at sigma: sum_j lambda_j(sigma) * Dbar_j.
inline Matrix assemble_source(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    sys.info().check_point(sigma);
    Matrix out;
    for (const auto& c : sys.d_components) {
        const double l = c.multiplier.evaluate(sigma);
        if (out.size() == 0) {
            out = l * c.matrix;
        } else {
            out.noalias() += l * c.matrix;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conductivity grid
// ---------------------------------------------------------------------------

enum class AxisScale { Linear, Log };

/// One grid axis. count == 1 pins the compartment at lo (hi must equal lo).
struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    Index count = 1;
    AxisScale scale = AxisScale::Linear;
};

/// Finite sampling of a rectangular conductivity domain. Samples are ordered
/// row-major with axis 0 outermost, so the ordering is deterministic.
class ConductivityGrid {
public:
    static ConductivityGrid regular(std::vector<GridAxis> axes) {
        ConductivityGrid grid;
        grid.axes_ = std::move(axes);
        if (grid.axes_.empty()) throw ConfigError("grid needs at least one axis");
        Index total = 1;
        for (std::size_t d = 0; d < grid.axes_.size(); ++d) {
            const GridAxis& ax = grid.axes_[d];
            if (ax.count < 1) throw ConfigError("grid axis count must be >= 1");
            if (ax.count == 1) {
                if (ax.lo != ax.hi) {
                    throw ConfigError("fixed grid axis " + std::to_string(d) +
                                      " must have lo == hi");
                }
            } else if (!(ax.lo < ax.hi)) {
                throw ConfigError("grid axis " + std::to_string(d) + " needs lo < hi");
            }
            if (ax.scale == AxisScale::Log && !(ax.lo > 0.0)) {
                throw ConfigError("log-scaled grid axis needs positive bounds");
            }
            if (!(ax.lo > 0.0)) throw ConfigError("grid bounds must be strictly positive");
            total *= ax.count;
        }

        std::vector<std::vector<double>> axis_values(grid.axes_.size());
        for (std::size_t d = 0; d < grid.axes_.size(); ++d) {
            axis_values[d] = grid.axis_values(static_cast<Index>(d));
        }

        grid.samples_.reserve(static_cast<std::size_t>(total));
        std::vector<Index> idx(grid.axes_.size(), 0);
        for (Index flat = 0; flat < total; ++flat) {
            Index rem = flat;
            for (std::size_t d = grid.axes_.size(); d-- > 0;) {
                idx[d] = rem % grid.axes_[d].count;
                rem /= grid.axes_[d].count;
            }
            std::vector<double> v(grid.axes_.size());
            for (std::size_t d = 0; d < grid.axes_.size(); ++d) {
                v[d] = axis_values[d][static_cast<std::size_t>(idx[d])];
            }
            grid.samples_.emplace_back(std::move(v));
        }
        return grid;
    }

    [[nodiscard]] Index size() const { return static_cast<Index>(samples_.size()); }
    const ConductivityPoint& operator[](Index i) const {
        return samples_[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] const std::vector<ConductivityPoint>& samples() const { return samples_; }
    [[nodiscard]] const std::vector<GridAxis>& axes() const { return axes_; }
    [[nodiscard]] Index n_axes() const { return static_cast<Index>(axes_.size()); }

    /// Values along one axis, in increasing order.
    [[nodiscard]] std::vector<double> axis_values(Index d) const {
        const GridAxis& ax = axes_[static_cast<std::size_t>(d)];
        std::vector<double> vals(static_cast<std::size_t>(ax.count));
        if (ax.count == 1) {
            vals[0] = ax.lo;
            return vals;
        }
        for (Index k = 0; k < ax.count; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(ax.count - 1);
            if (ax.scale == AxisScale::Linear) {
                vals[static_cast<std::size_t>(k)] = ax.lo + t * (ax.hi - ax.lo);
            } else {
                vals[static_cast<std::size_t>(k)] =
                    std::exp(std::log(ax.lo) + t * (std::log(ax.hi) - std::log(ax.lo)));
            }
        }
        vals.front() = ax.lo;
        vals.back() = ax.hi;
        return vals;
    }

    /// Flat sample index from per-axis indices (axis 0 outermost).
    [[nodiscard]] Index flat_index(const std::vector<Index>& per_axis) const {
        Index flat = 0;
        for (std::size_t d = 0; d < axes_.size(); ++d) {
            flat = flat * axes_[d].count + per_axis[d];
        }
        return flat;
    }

    /// Index of the sample matching sigma within relative tolerance, or -1.
    [[nodiscard]] Index index_of(const ConductivityPoint& sigma, double rel_tol = 1e-9) const {
        for (Index i = 0; i < size(); ++i) {
            const ConductivityPoint& s = samples_[static_cast<std::size_t>(i)];
            if (s.size() != sigma.size()) return -1;
            bool match = true;
            for (Index d = 0; d < s.size(); ++d) {
                const double scale = std::max(std::abs(s[d]), std::abs(sigma[d]));
                if (std::abs(s[d] - sigma[d]) > rel_tol * std::max(scale, 1e-300)) {
                    match = false;
                    break;
                }
            }
            if (match) return i;
        }
        return -1;
    }

    [[nodiscard]] bool contains(const ConductivityPoint& sigma) const {
        if (sigma.size() != n_axes()) return false;
        for (Index d = 0; d < n_axes(); ++d) {
            const GridAxis& ax = axes_[static_cast<std::size_t>(d)];
            if (sigma[d] < ax.lo || sigma[d] > ax.hi) return false;
        }
        return true;
    }

    /// First axis with more than one sample; -1 if the grid is a single point.
    [[nodiscard]] Index first_varying_axis() const {
        for (std::size_t d = 0; d < axes_.size(); ++d) {
            if (axes_[d].count > 1) return static_cast<Index>(d);
        }
        return -1;
    }

    /// Stable id over the axis specification, for provenance records.
    [[nodiscard]] std::string id() const {
        std::string desc;
        for (const GridAxis& ax : axes_) {
            desc += format_double(ax.lo) + ":" + format_double(ax.hi) + ":" +
                    std::to_string(ax.count) + ":" +
                    (ax.scale == AxisScale::Linear ? "lin" : "log") + ";";
        }
        return hex64(fnv1a(desc));
    }

private:
    std::vector<GridAxis> axes_;
    std::vector<ConductivityPoint> samples_;
};

}  // namespace lfrb
