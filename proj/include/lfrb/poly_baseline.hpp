#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/numerics.hpp"
#include "lfrb/reduced_basis.hpp"

#include <string>
#include <algorithm>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Per-entry polynomial interpolation of the lead field along one conductivity
// axis: the comparison baseline. n nodes determine the unique interpolating
// polynomial of degree n - 1 for every lead-field entry, held in barycentric
// form; a monomial representation of degree ~20 over [1e-4, 1e-1] would be
// numerically hopeless.
// ---------------------------------------------------------------------------

enum class NodeTransform { Linear, Log };

struct PolyModel {
    Index axis = 0;                  ///< varying compartment
    ConductivityPoint base;          ///< values of the fixed compartments
    std::vector<double> nodes;       ///< conductivity values on `axis`
    std::vector<Matrix> node_fields; ///< exact lead fields at the nodes
    std::vector<double> weights;     ///< barycentric weights on normalized nodes
    NodeTransform transform = NodeTransform::Linear;
    double t_lo = 0.0, t_hi = 1.0;   ///< normalization range in transform space

    [[nodiscard]] Index degree() const { return static_cast<Index>(nodes.size()) - 1; }
};

namespace detail {

inline double node_coordinate(double sigma, NodeTransform transform) {
    if (transform == NodeTransform::Log) {
        if (!(sigma > 0.0)) throw ConfigError("log node transform needs positive conductivity");
        return std::log(sigma);
    }
    return sigma;
}

/// Maps a transform-space coordinate to [-1, 1]; keeps weights in range for
/// a few dozen nodes.
inline double normalize_coordinate(double t, double t_lo, double t_hi) {
    if (t_hi == t_lo) return 0.0;
    return 2.0 * (t - t_lo) / (t_hi - t_lo) - 1.0;
}

}  // namespace detail

/// Builds the barycentric model from nodes and their lead fields.
inline PolyModel poly_fit_from_fields(Index axis, std::vector<double> nodes,
                                      std::vector<Matrix> fields, ConductivityPoint base,
                                      NodeTransform transform = NodeTransform::Linear) {
    if (nodes.empty()) throw ConfigError("polynomial model needs at least one node");
    if (nodes.size() != fields.size()) {
        throw ConfigError("node and field counts differ");
    }
    PolyModel model;
    model.axis = axis;
    model.base = std::move(base);
    model.nodes = std::move(nodes);
    model.node_fields = std::move(fields);
    model.transform = transform;

    std::vector<double> t(model.nodes.size());
    double lo = detail::node_coordinate(model.nodes[0], transform);
    double hi = lo;
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        t[i] = detail::node_coordinate(model.nodes[i], transform);
        lo = std::min(lo, t[i]);
        hi = std::max(hi, t[i]);
    }
    model.t_lo = lo;
    model.t_hi = hi;

    model.weights.assign(model.nodes.size(), 1.0);
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const double ti = detail::normalize_coordinate(t[i], lo, hi);
        for (std::size_t j = 0; j < model.nodes.size(); ++j) {
            if (i == j) continue;
            const double tj = detail::normalize_coordinate(t[j], lo, hi);
            const double diff = ti - tj;
            if (diff == 0.0) {
                throw ConfigError("coincident polynomial nodes at conductivity " +
                                  format_double(model.nodes[i]));
            }
            model.weights[i] /= diff;
        }
    }
    return model;
}

/// Query point for the model: `base` with `axis` replaced by sigma_axis.
inline ConductivityPoint poly_query_point(const PolyModel& model, double sigma_axis) {
    std::vector<double> values = model.base.values();
    values[static_cast<std::size_t>(model.axis)] = sigma_axis;
    return ConductivityPoint(std::move(values));
}

/// Fits the baseline by computing exact lead fields at the nodes.
inline PolyModel poly_fit(const ParametrizedSystem& sys, Index axis, std::vector<double> nodes,
                          const ConductivityPoint& base,
                          NodeTransform transform = NodeTransform::Linear, int jobs = 0) {
    if (axis < 0 || axis >= base.size()) throw ConfigError("polynomial axis out of range");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (nodes[i] == nodes[j]) {
                throw ConfigError("coincident polynomial nodes at conductivity " +
                                  format_double(nodes[i]));
            }
        }
    }
    std::vector<Matrix> fields(nodes.size());
    PolyModel probe;  // reuse the query-point helper before the model exists
    probe.axis = axis;
    probe.base = base;
    parallel_for(static_cast<Index>(nodes.size()), jobs, [&](Index i) {
        fields[static_cast<std::size_t>(i)] =
            exact_lead_field(sys, poly_query_point(probe, nodes[static_cast<std::size_t>(i)]));
    });
    return poly_fit_from_fields(axis, std::move(nodes), std::move(fields), base, transform);
}

struct PolyEval {
    Matrix leadfield;
    bool extrapolated = false;  ///< query outside the node range
};

/// Entrywise barycentric evaluation; shared scalar coefficients make the
/// result a fixed linear combination of the node fields.
inline PolyEval poly_eval(const PolyModel& model, double sigma_axis) {
    PolyEval out;
    const double lo = *std::min_element(model.nodes.begin(), model.nodes.end());
    const double hi = *std::max_element(model.nodes.begin(), model.nodes.end());
    out.extrapolated = sigma_axis < lo || sigma_axis > hi;

    const double t = detail::normalize_coordinate(
        detail::node_coordinate(sigma_axis, model.transform), model.t_lo, model.t_hi);
    // Exact node hit: return the stored field.
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const double ti = detail::normalize_coordinate(
            detail::node_coordinate(model.nodes[i], model.transform), model.t_lo, model.t_hi);
        if (t == ti) {
            out.leadfield = model.node_fields[i];
            return out;
        }
    }
    double denom = 0.0;
    std::vector<double> numer(model.nodes.size());
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const double ti = detail::normalize_coordinate(
            detail::node_coordinate(model.nodes[i], model.transform), model.t_lo, model.t_hi);
        numer[i] = model.weights[i] / (t - ti);
        denom += numer[i];
    }
    out.leadfield = Matrix::Zero(model.node_fields[0].rows(), model.node_fields[0].cols());
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        out.leadfield.noalias() += (numer[i] / denom) * model.node_fields[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Method comparison on a one-dimensional sweep
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string method;  ///< "reduced-basis" or "polynomial" (or "polynomial-log")
    Index n = 0;         ///< precomputed exact lead fields / support points
    double mean_rel_error = 0.0;
    double max_rel_error = 0.0;
    double max_rel_upper_bound = 0.0;  ///< reduced-basis rows only
};

inline std::vector<double> uniform_nodes(double lo, double hi, Index count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (Index k = 0; k < count; ++k) {
        out[static_cast<std::size_t>(k)] =
            lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

/// For each n: reduced-basis selection on a 25-sample uniform axis grid
/// (corner-initialized, grown to exactly n supports) versus polynomial
/// interpolation on n uniform nodes of degree n - 1. Errors are relative
/// Frobenius against `eval_count` uniformly sampled exact lead fields.
/// Emits 2 rows per n (3 with the log-spaced polynomial variant).
inline std::vector<ComparisonRow> compare_methods(const ParametrizedSystem& sys, Index axis,
                                                  double lo, double hi,
                                                  const ConductivityPoint& base,
                                                  const std::vector<Index>& n_values,
                                                  Index eval_count, int jobs = 0,
                                                  bool log_node_variant = false,
                                                  Index selection_grid_size = 25) {
    if (n_values.empty()) throw ConfigError("comparison needs at least one basis size");
    Index n_max = 0;
    for (Index n : n_values) {
        if (n < 2) throw ConfigError("comparison basis sizes must be >= 2");
        n_max = std::max(n_max, n);
    }
    if (eval_count < 2) throw ConfigError("comparison needs at least two evaluation points");

    PolyModel probe;
    probe.axis = axis;
    probe.base = base;

    // Shared evaluation set of exact lead fields.
    const std::vector<double> eval_sigmas = uniform_nodes(lo, hi, eval_count);
    std::vector<Matrix> eval_fields(eval_sigmas.size());
    std::vector<double> eval_norms(eval_sigmas.size());
    parallel_for(eval_count, jobs, [&](Index i) {
        eval_fields[static_cast<std::size_t>(i)] =
            exact_lead_field(sys, poly_query_point(probe, eval_sigmas[static_cast<std::size_t>(i)]));
        eval_norms[static_cast<std::size_t>(i)] = eval_fields[static_cast<std::size_t>(i)].norm();
    });

    // One selection run to the largest n; smaller n replay its prefixes.
    std::vector<GridAxis> axes;
    for (Index d = 0; d < base.size(); ++d) {
        if (d == axis) {
            axes.push_back(GridAxis{lo, hi, selection_grid_size, AxisScale::Linear});
        } else {
            axes.push_back(GridAxis{base[d], base[d], 1, AxisScale::Linear});
        }
    }
    const ConductivityGrid selection_grid = ConductivityGrid::regular(std::move(axes));
    GreedyConfig cfg;
    cfg.init = GreedyConfig::Init::Corners;
    cfg.eps_abs = 0.0;
    cfg.eps_delta = 0.0;
    cfg.max_supports = std::min<Index>(n_max, selection_grid.size());
    cfg.jobs = jobs;
    const SupportBasis basis = select_supports(sys, selection_grid, cfg);

    std::vector<ComparisonRow> rows;
    for (Index n : n_values) {
        ComparisonRow rb{"reduced-basis", n, 0.0, 0.0, 0.0};
        const Index n_use = std::min<Index>(n, basis.size());
        for (Index i = 0; i < eval_count; ++i) {
            const Approximation approx =
                approximate(basis, poly_query_point(probe, eval_sigmas[static_cast<std::size_t>(i)]),
                            n_use);
            const double err = (eval_fields[static_cast<std::size_t>(i)] - approx.leadfield).norm() /
                               eval_norms[static_cast<std::size_t>(i)];
            rb.mean_rel_error += err;
            rb.max_rel_error = std::max(rb.max_rel_error, err);
            rb.max_rel_upper_bound =
                std::max(rb.max_rel_upper_bound, approx.solution.relative_upper_bound);
        }
        rb.mean_rel_error /= static_cast<double>(eval_count);
        rows.push_back(rb);

        auto poly_row = [&](NodeTransform transform, const std::string& name) {
            std::vector<double> nodes;
            if (transform == NodeTransform::Linear) {
                nodes = uniform_nodes(lo, hi, n);
            } else {
                nodes = uniform_nodes(std::log(lo), std::log(hi), n);
                for (double& v : nodes) v = std::exp(v);
                nodes.front() = lo;
                nodes.back() = hi;
            }
            const PolyModel model = poly_fit(sys, axis, std::move(nodes), base, transform, jobs);
            ComparisonRow row{name, n, 0.0, 0.0, 0.0};
            for (Index i = 0; i < eval_count; ++i) {
                const PolyEval eval = poly_eval(model, eval_sigmas[static_cast<std::size_t>(i)]);
                const double err =
                    (eval_fields[static_cast<std::size_t>(i)] - eval.leadfield).norm() /
                    eval_norms[static_cast<std::size_t>(i)];
                row.mean_rel_error += err;
                row.max_rel_error = std::max(row.max_rel_error, err);
            }
            row.mean_rel_error /= static_cast<double>(eval_count);
            rows.push_back(row);
        };
        poly_row(NodeTransform::Linear, "polynomial");
        if (log_node_variant) poly_row(NodeTransform::Log, "polynomial-log");
    }
    return rows;
}

}  // namespace lfrb
