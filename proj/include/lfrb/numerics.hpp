#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"

#include <span>
#include <algorithm>
#include <memory>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Factor-and-solve for the assembled head matrix
// ---------------------------------------------------------------------------

/// Cholesky factorization of the assembled head matrix, with an LU fallback
/// for non-SPD inputs. Keeps the assembled matrix so solves can run one step
/// of residual refinement. Never forms an explicit inverse.
class HeadFactor {
public:
    HeadFactor(Matrix head, const ConductivityPoint& sigma) : head_(std::move(head)) {
        llt_.compute(head_);
        if (llt_.info() == Eigen::Success) {
            rcond_ = llt_.rcond();
        } else {
            lu_ = std::make_unique<Eigen::PartialPivLU<Matrix>>(head_);
            rcond_ = lu_->rcond();
        }
        if (!(rcond_ > kMinRcond)) {
            throw NumericalError("head matrix is singular or ill-conditioned at sigma = " +
                                 sigma.to_string() +
                                 " (reciprocal condition estimate " + format_double(rcond_) + ")");
        }
    }

    [[nodiscard]] const Matrix& head() const { return head_; }
    [[nodiscard]] double rcond() const { return rcond_; }

    /// Solves head * X = B with one conditional refinement pass.
    [[nodiscard]] Matrix solve(const Matrix& b) const {
        Matrix x = raw_solve(b);
        refine(b, x, /*transposed=*/false);
        return x;
    }

    /// Solves head^T * X = B. Identical to solve() for symmetric assemblies.
    [[nodiscard]] Matrix solve_transposed(const Matrix& b) const {
        Matrix x = raw_solve_transposed(b);
        refine(b, x, /*transposed=*/true);
        return x;
    }

private:
    static constexpr double kMinRcond = 1e-14;  // condition estimate cap 1e14

    [[nodiscard]] Matrix raw_solve(const Matrix& b) const {
        if (lu_) return lu_->solve(b);
        return llt_.solve(b);
    }
    [[nodiscard]] Matrix raw_solve_transposed(const Matrix& b) const {
        if (lu_) return lu_->transpose().solve(b);
        return llt_.solve(b);
    }

    void refine(const Matrix& b, Matrix& x, bool transposed) const {
        const double b_norm = b.norm();
        if (b_norm == 0.0) return;
        Matrix residual;
        if (transposed) {
            residual.noalias() = b - head_.transpose() * x;
        } else {
            residual.noalias() = b - head_ * x;
        }
        if (residual.norm() > 1e-13 * b_norm) {
            x += transposed ? raw_solve_transposed(residual) : raw_solve(residual);
        }
    }

    Matrix head_;
    Eigen::LLT<Matrix> llt_;
    std::unique_ptr<Eigen::PartialPivLU<Matrix>> lu_;
    double rcond_ = 0.0;
};

inline HeadFactor factor_head(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    return HeadFactor(assemble_head(sys, sigma), sigma);
}

// ---------------------------------------------------------------------------
// Exact lead fields
// ---------------------------------------------------------------------------

/// Exact lead field plus the norms needed for the error-bound constant.
struct ExactForward {
    Matrix leadfield;      ///< n_electrodes x n_sources
    double hinv_d_norm;    ///< Frobenius norm of head^{-1} * source matrix
    double leadfield_norm; ///< Frobenius norm of the lead field
};

/// Computes selection * head^{-1} * source at sigma via factor-and-solve.
inline ExactForward exact_forward(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    const HeadFactor factor = factor_head(sys, sigma);
    const Matrix d = assemble_source(sys, sigma);
    const Matrix x = factor.solve(d);
    ExactForward out;
    out.leadfield.noalias() = sys.selection * x;
    out.hinv_d_norm = x.norm();
    out.leadfield_norm = out.leadfield.norm();
    return out;
}

inline Matrix exact_lead_field(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    return exact_forward(sys, sigma).leadfield;
}

/// sigma-dependent constant relating the computable surrogate bound to the
/// true relative lead-field error: |head^{-1} D|_F / |L|_F. Diagnostic path;
/// requires dense solves.
inline double bound_constant(const ParametrizedSystem& sys, const ConductivityPoint& sigma) {
    const ExactForward fwd = exact_forward(sys, sigma);
    return fwd.hinv_d_norm / fwd.leadfield_norm;
}

// ---------------------------------------------------------------------------
// Reduced rows
// ---------------------------------------------------------------------------

/// The electrode rows of the inverse head matrix at one support point:
/// rows = selection * head^{-1}, shape n_electrodes x n_unknowns.
struct ReducedRows {
    Matrix rows;
    ConductivityPoint sigma;
};

/// Computes reduced rows by n_electrodes transposed solves. Enforces the
/// residual invariant |rows * head - selection|_F <= 1e-9 * |selection|_F.
inline ReducedRows compute_reduced_rows(const ParametrizedSystem& sys,
                                        const ConductivityPoint& sigma) {
    const HeadFactor factor = factor_head(sys, sigma);
    Matrix y = factor.solve_transposed(sys.selection.transpose());
    ReducedRows out{y.transpose(), sigma};
    const double s_norm = sys.selection.norm();
    Matrix residual;
    residual.noalias() = out.rows * factor.head();
    residual -= sys.selection;
    if (residual.norm() > 1e-9 * s_norm) {
        throw NumericalError("reduced-row solve residual " +
                             format_double(residual.norm() / s_norm) +
                             " exceeds 1e-9 at sigma = " + sigma.to_string());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gram data
// ---------------------------------------------------------------------------

/// sigma-independent normal-equation data for the coefficient solve.
///
/// Column (i, j) of the implicit regressor matrix is the vectorization of
/// rows_i * Hbar_j, ordered j fastest: column index = i * n_h + j. Only the
/// Gram matrix and the right-hand side against vec(selection) are stored; the
/// regressor itself (n_electrodes * n_unknowns rows) is never materialized.
/// Entries are held in extended precision: the bound evaluation subtracts
/// nearly equal numbers, and binary64 entries would put its floor near 1e-8
/// of |selection|_F, too coarse near the support points.
struct GramData {
    AccumMatrix gram;    ///< (n * n_h) x (n * n_h), symmetric PSD
    AccumVector rhs;     ///< (n * n_h), inner products against vec(selection)
    Accum s_norm_sq = 0; ///< |selection|_F^2
    Index n_h = 0;
    Index n_supports = 0;
};

/// Returns a copy of `gram` extended by one support point. Existing entries
/// are copied bit-identically; the new row/column block is computed by
/// streaming the per-support products rows_i * Hbar_j one support at a time.
inline GramData extend_gram(const GramData& gram, const ParametrizedSystem& sys,
                            std::span<const ReducedRows> existing, const ReducedRows& added,
                            int jobs = 1) {
    const Index n_h = static_cast<Index>(sys.h_components.size());
    if (gram.n_supports != static_cast<Index>(existing.size())) {
        throw ConfigError("gram data covers " + std::to_string(gram.n_supports) +
                          " supports but " + std::to_string(existing.size()) + " were supplied");
    }
    if (gram.n_supports > 0 && gram.n_h != n_h) {
        throw ConfigError("gram data component count does not match the system");
    }

    GramData out;
    out.n_h = n_h;
    out.n_supports = gram.n_supports + 1;
    const Index old_size = gram.n_supports * n_h;
    const Index new_size = out.n_supports * n_h;
    out.gram = AccumMatrix::Zero(new_size, new_size);
    out.gram.topLeftCorner(old_size, old_size) = gram.gram;
    out.rhs = AccumVector::Zero(new_size);
    out.rhs.head(old_size) = gram.rhs;
    out.s_norm_sq = gram.n_supports > 0
                        ? gram.s_norm_sq
                        : compensated_dot(sys.selection.data(), sys.selection.data(),
                                          sys.selection.size());

    // Products for the added support are shared by every cross block.
    std::vector<Matrix> added_products(static_cast<std::size_t>(n_h));
    for (Index j = 0; j < n_h; ++j) {
        added_products[static_cast<std::size_t>(j)].noalias() =
            added.rows * sys.h_components[static_cast<std::size_t>(j)].matrix;
    }

    for (Index j = 0; j < n_h; ++j) {
        out.rhs[old_size + j] =
            frobenius_dot(added_products[static_cast<std::size_t>(j)], sys.selection);
    }

    parallel_for(out.n_supports, jobs, [&](Index i) {
        if (i == gram.n_supports) {
            for (Index j = 0; j < n_h; ++j) {
                for (Index l = j; l < n_h; ++l) {
                    const Accum value =
                        frobenius_dot(added_products[static_cast<std::size_t>(j)],
                                      added_products[static_cast<std::size_t>(l)]);
                    out.gram(old_size + j, old_size + l) = value;
                    out.gram(old_size + l, old_size + j) = value;
                }
            }
            return;
        }
        const Matrix& rows_i = existing[static_cast<std::size_t>(i)].rows;
        Matrix product_il;
        for (Index l = 0; l < n_h; ++l) {
            product_il.noalias() = rows_i * sys.h_components[static_cast<std::size_t>(l)].matrix;
            for (Index j = 0; j < n_h; ++j) {
                const Accum value =
                    frobenius_dot(product_il, added_products[static_cast<std::size_t>(j)]);
                out.gram(i * n_h + l, old_size + j) = value;
                out.gram(old_size + j, i * n_h + l) = value;
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Coefficient solve and upper bound
// ---------------------------------------------------------------------------

/// Optimal combination coefficients at one conductivity point, with the
/// computable upper-bound surrogate for the relative lead-field error.
struct CoefficientSolution {
    Vector coefficients;          ///< one per support point
    double upper_bound = 0.0;     ///< |selection - sum_i c_i rows_i H_sigma|_F
    double relative_upper_bound = 0.0;  ///< upper_bound / |selection|_F
    bool regularized = false;     ///< spectral cutoff dropped directions
};

namespace detail {

/// Eigenvalues below 1e-12 * lambda_max are treated as null directions.
/// Exact arithmetic keeps the reduced normal matrix full rank as long as the
/// support selection only adds points with nonzero bound, but floating point
/// loses that guarantee near convergence.
constexpr Accum kSpectralCutoffRatio = 1e-12L;

inline AccumVector multiplier_values(const std::vector<MultiplierSpec>& specs,
                                     const ConductivityPoint& sigma) {
    AccumVector out(static_cast<Index>(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        out[static_cast<Index>(i)] = static_cast<Accum>(specs[i].evaluate(sigma));
    }
    return out;
}

}  // namespace detail

/// Solves the normal equations for the combination coefficients at sigma,
/// restricted to the first n_limit supports (n_limit < 0 uses all).
///
/// The per-sigma normal matrix is n x n: its (i, k) entry contracts the
/// stored Gram block for supports (i, k) with the head multiplier values at
/// sigma on both sides. Cost is independent of n_unknowns.
inline CoefficientSolution solve_coefficients(const GramData& gram, const SystemInfo& info,
                                              const ConductivityPoint& sigma,
                                              Index n_limit = -1) {
    info.check_point(sigma);
    const Index n = (n_limit < 0) ? gram.n_supports : std::min(n_limit, gram.n_supports);
    if (n < 1) throw ConfigError("coefficient solve requires at least one support point");
    const Index n_h = gram.n_h;
    if (static_cast<Index>(info.h_multipliers.size()) != n_h) {
        throw ConfigError("system multiplier count does not match gram data");
    }

    const AccumVector g = detail::multiplier_values(info.h_multipliers, sigma);

    AccumMatrix normal(n, n);
    AccumVector rhs(n);
    for (Index i = 0; i < n; ++i) {
        KahanAccumulator bi;
        for (Index j = 0; j < n_h; ++j) bi.add(g[j] * gram.rhs[i * n_h + j]);
        rhs[i] = bi.value();
        for (Index k = i; k < n; ++k) {
            KahanAccumulator acc;
            for (Index j = 0; j < n_h; ++j) {
                for (Index l = 0; l < n_h; ++l) {
                    acc.add(g[j] * gram.gram(i * n_h + j, k * n_h + l) * g[l]);
                }
            }
            normal(i, k) = acc.value();
            normal(k, i) = acc.value();
        }
    }

    Eigen::SelfAdjointEigenSolver<AccumMatrix> eigensolver(normal);
    if (eigensolver.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition of the reduced normal matrix failed at sigma = " +
                             sigma.to_string());
    }
    const AccumVector& eigenvalues = eigensolver.eigenvalues();
    const AccumMatrix& eigenvectors = eigensolver.eigenvectors();
    const Accum lambda_max = eigenvalues[n - 1];
    const Accum cutoff = lambda_max > 0 ? detail::kSpectralCutoffRatio * lambda_max : Accum(0);

    CoefficientSolution out;
    AccumVector coeffs = AccumVector::Zero(n);
    Index kept = 0;
    for (Index i = 0; i < n; ++i) {
        if (eigenvalues[i] > cutoff && eigenvalues[i] > 0) {
            const Accum projection = eigenvectors.col(i).dot(rhs);
            coeffs += (projection / eigenvalues[i]) * eigenvectors.col(i);
            ++kept;
        }
    }
    out.regularized = (kept < n);

    // Bound value from the quadratic form, accumulated with compensation:
    // |selection|_F^2 - 2 c.b + c.N.c, clamped at zero (it is a squared norm).
    KahanAccumulator quad;
    quad.add(gram.s_norm_sq);
    for (Index i = 0; i < n; ++i) quad.add(-2.0L * coeffs[i] * rhs[i]);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            quad.add(coeffs[i] * normal(i, k) * coeffs[k]);
        }
    }
    const Accum bound_sq = std::max<Accum>(quad.value(), 0.0L);
    const Accum s_norm = std::sqrt(gram.s_norm_sq);

    out.coefficients = Vector(n);
    for (Index i = 0; i < n; ++i) out.coefficients[i] = static_cast<double>(coeffs[i]);
    out.upper_bound = static_cast<double>(std::sqrt(bound_sq));
    out.relative_upper_bound = static_cast<double>(std::sqrt(bound_sq) / s_norm);
    return out;
}

/// Evaluates the upper bound by explicit assembly:
/// |selection - sum_i c_i * (rows_i * head_sigma)|_F. Diagnostic path; agrees
/// with the closed form from solve_coefficients away from the rounding floor.
inline double upper_bound_direct(const ParametrizedSystem& sys,
                                 std::span<const ReducedRows> supports,
                                 const Vector& coefficients, const ConductivityPoint& sigma) {
    if (static_cast<Index>(supports.size()) < coefficients.size()) {
        throw ConfigError("fewer support rows than coefficients");
    }
    const Matrix head = assemble_head(sys, sigma);
    Matrix acc = sys.selection;
    for (Index i = 0; i < coefficients.size(); ++i) {
        acc.noalias() -= coefficients[i] * (supports[static_cast<std::size_t>(i)].rows * head);
    }
    return acc.norm();
}

}  // namespace lfrb
