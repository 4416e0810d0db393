#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lfrb;
using namespace lfrb::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_lead(Index electrodes, Index sources, std::uint64_t seed) {
    Rng rng(seed);
    Matrix lead(electrodes, sources);
    for (Index i = 0; i < electrodes; ++i) {
        for (Index j = 0; j < sources; ++j) lead(i, j) = rng.normal();
    }
    return lead;
}

}  // namespace

TEST_CASE("fitting an exact column recovers source and amplitude", "[estimation]") {
    const Matrix lead = random_lead(8, 12, 3);
    const Vector y = 3.0 * lead.col(7);
    const FitResult fit = fit_single(y, lead);
    CHECK(fit.best_source == 7);
    CHECK_THAT(fit.best_amplitudes[0], WithinRel(3.0, 1e-12));
    CHECK(fit.r_value <= 1e-12 * y.norm());
}

TEST_CASE("a topography orthogonal to every column keeps its norm", "[estimation]") {
    Matrix lead = Matrix::Zero(4, 2);
    lead(0, 0) = 1.0;
    lead(1, 1) = 1.0;
    Vector y = Vector::Zero(4);
    y[2] = 2.0;
    y[3] = -1.0;
    const FitResult fit = fit_single(y, lead);
    CHECK_THAT(fit.r_value, WithinRel(y.norm(), 1e-14));
    // Amplitude on the winning column is zero: the data has no component there.
    CHECK(fit.best_amplitudes[0] == 0.0);
}

TEST_CASE("zero columns are handled with zero amplitude", "[estimation]") {
    Matrix lead = Matrix::Zero(4, 3);
    lead.col(1) = Vector::Ones(4);
    Vector y = Vector::Ones(4);
    const FitResult fit = fit_single(y, lead);
    CHECK(fit.best_source == 1);
    CHECK(fit.r_value <= 1e-14);
}

TEST_CASE("single fits match a per-column oracle", "[estimation]") {
    const Matrix lead = random_lead(10, 20, 5);
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Vector y(10);
        for (Index e = 0; e < 10; ++e) y[e] = rng.normal();

        double best = y.norm();
        Index best_j = 0;
        for (Index j = 0; j < 20; ++j) {
            const double q = lead.col(j).squaredNorm();
            const double a = q > 0 ? y.dot(lead.col(j)) / q : 0.0;
            const double r = (y - a * lead.col(j)).norm();
            if (r < best) {
                best = r;
                best_j = j;
            }
        }
        const FitResult fit = fit_single(y, lead);
        CHECK(fit.best_source == best_j);
        CHECK_THAT(fit.r_value, WithinRel(best, 1e-12));
    }
}

TEST_CASE("fit residual never exceeds the data norm", "[estimation]") {
    const Matrix lead = random_lead(6, 9, 8);
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        Vector y(6);
        for (Index e = 0; e < 6; ++e) y[e] = rng.normal();
        CHECK(fit_single(y, lead).r_value <= y.norm() * (1.0 + 1e-12));
    }
}

TEST_CASE("fits are invariant under column sign flips", "[estimation]") {
    const Matrix lead = random_lead(6, 9, 12);
    Matrix flipped = lead;
    flipped.col(2) *= -1.0;
    flipped.col(5) *= -1.0;
    Rng rng(13);
    Vector y(6);
    for (Index e = 0; e < 6; ++e) y[e] = rng.normal();

    const FitResult a = fit_single(y, lead);
    const FitResult b = fit_single(y, flipped);
    CHECK(a.best_source == b.best_source);
    CHECK_THAT(a.r_value, WithinRel(b.r_value, 1e-12));
}

TEST_CASE("multi-sample fit reduces to the single fit at one sample", "[estimation]") {
    const Matrix lead = random_lead(8, 10, 20);
    Rng rng(21);
    Vector y(8);
    for (Index e = 0; e < 8; ++e) y[e] = rng.normal();
    const FitResult single = fit_single(y, lead);
    const FitResult multi = fit_multi(Matrix(y), lead);
    CHECK(single.best_source == multi.best_source);
    CHECK(single.r_value == multi.r_value);
    CHECK(single.best_amplitudes == multi.best_amplitudes);
}

TEST_CASE("multi-sample data from one source is fit exactly", "[estimation]") {
    const Matrix lead = random_lead(8, 10, 22);
    Matrix samples(8, 4);
    const std::vector<double> amplitudes = {1.0, -0.5, 2.0, 0.25};
    for (Index t = 0; t < 4; ++t) samples.col(t) = amplitudes[static_cast<std::size_t>(t)] * lead.col(3);
    const FitResult fit = fit_multi(samples, lead);
    CHECK(fit.best_source == 3);
    CHECK(fit.r_value <= 1e-12);
    for (Index t = 0; t < 4; ++t) {
        CHECK_THAT(fit.best_amplitudes[static_cast<std::size_t>(t)],
                   WithinRel(amplitudes[static_cast<std::size_t>(t)], 1e-12));
    }
}

TEST_CASE("multi-sample fit matches an exhaustive oracle", "[estimation]") {
    const Matrix lead = random_lead(6, 5, 30);
    Rng rng(31);
    Matrix samples(6, 3);
    for (Index t = 0; t < 3; ++t) {
        for (Index e = 0; e < 6; ++e) samples(e, t) = rng.normal();
    }

    double best = std::numeric_limits<double>::infinity();
    Index best_j = -1;
    for (Index j = 0; j < 5; ++j) {
        double score = 0.0;
        for (Index t = 0; t < 3; ++t) {
            const double q = lead.col(j).squaredNorm();
            const double a = q > 0 ? samples.col(t).dot(lead.col(j)) / q : 0.0;
            score += (samples.col(t) - a * lead.col(j)).norm();
        }
        if (score < best) {
            best = score;
            best_j = j;
        }
    }
    const FitResult fit = fit_multi(samples, lead);
    CHECK(fit.best_source == best_j);
    CHECK_THAT(fit.r_value, WithinRel(best, 1e-12));
}

TEST_CASE("noiseless maps have their minimum at the simulated point", "[estimation]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const ConductivityGrid grid = small_grid(4);
    const Index truth_index = 5;
    const Vector y = simulate_topography(sys, grid[truth_index], 4, 1.0, 0.0, 1);

    const DataFitMap map = error_map(sys, grid, Matrix(y), LeadfieldMode::Exact, nullptr, -1,
                                     MapNormalization::Raw, 2);
    const ConductivityEstimate est = estimate_conductivity(map);
    CHECK(est.argmin_index == truth_index);
    CHECK(est.sigma_hat == grid[truth_index]);
    CHECK(map.values[truth_index] <= 1e-10);
    CHECK_FALSE(est.flat);
}

TEST_CASE("approximate-mode maps agree with exact-mode maps once converged", "[estimation]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const ConductivityGrid grid = small_grid(4);
    GreedyConfig cfg;
    cfg.eps_abs = 1e-6;
    cfg.max_supports = 12;
    cfg.jobs = 2;
    const SupportBasis basis = select_supports(sys, grid, cfg);

    const Index truth_index = 6;
    const Vector y = simulate_topography(sys, grid[truth_index], 3, 1.0, 0.0, 2);
    const DataFitMap exact_map = error_map(sys, grid, Matrix(y), LeadfieldMode::Exact, nullptr,
                                           -1, MapNormalization::Raw, 2);
    const DataFitMap approx_map = error_map(sys, grid, Matrix(y), LeadfieldMode::Approximate,
                                            &basis, -1, MapNormalization::Raw, 2);
    CHECK(estimate_conductivity(exact_map).argmin_index ==
          estimate_conductivity(approx_map).argmin_index);
}

TEST_CASE("min-normalized maps bottom out at exactly one", "[estimation]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const ConductivityGrid grid = small_grid(3);
    const Vector y = simulate_topography(sys, grid[2], 2, 1.0, 0.05, 3);
    const DataFitMap map = error_map(sys, grid, Matrix(y), LeadfieldMode::Exact, nullptr, -1,
                                     MapNormalization::MinNormalized, 2);
    double min_value = std::numeric_limits<double>::infinity();
    for (double v : map.values) min_value = std::min(min_value, v);
    CHECK(min_value == 1.0);
}

TEST_CASE("invalid samples are recorded, not fatal", "[estimation]") {
    // One grid point drives the head matrix past the conditioning cap.
    ParametrizedSystem sys;
    sys.n_unknowns = 2;
    sys.n_electrodes = 2;
    sys.n_sources = 1;
    sys.n_compartments = 1;
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 1e-16;
    Matrix stabilizer = Matrix::Identity(2, 2);
    sys.h_components.push_back({h, MultiplierSpec::constant(1.0)});
    sys.h_components.push_back({stabilizer, MultiplierSpec::linear(0)});
    sys.d_components.push_back({Matrix::Ones(2, 1), MultiplierSpec::constant(1.0)});
    sys.selection = Matrix::Identity(2, 2);
    sys.validate();

    // sigma = 1 is fine; sigma near 1e-18 is numerically singular.
    const ConductivityGrid grid = ConductivityGrid::regular(
        {GridAxis{1e-18, 1.0, 3, AxisScale::Log}});
    const Vector y = Vector::Ones(2);
    const DataFitMap map = error_map(sys, grid, Matrix(y), LeadfieldMode::Exact, nullptr, -1,
                                     MapNormalization::Raw, 1);
    CHECK(map.valid[0] == 0);
    CHECK(map.valid[2] == 1);
    const ConductivityEstimate est = estimate_conductivity(map);
    CHECK(map.valid[static_cast<std::size_t>(est.argmin_index)] == 1);
}

TEST_CASE("constant maps are flagged flat with the lowest index", "[estimation]") {
    DataFitMap map;
    map.grid = small_grid(3);
    map.values.assign(static_cast<std::size_t>(map.grid.size()), 2.5);
    map.valid.assign(static_cast<std::size_t>(map.grid.size()), 1);
    map.best_source.assign(static_cast<std::size_t>(map.grid.size()), 0);
    const ConductivityEstimate est = estimate_conductivity(map);
    CHECK(est.argmin_index == 0);
    CHECK(est.flat);
}

TEST_CASE("profiles track the conditional minimum per first-axis value", "[estimation]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const ConductivityGrid grid = small_grid(4);
    const Vector y = simulate_topography(sys, grid[9], 5, 1.0, 0.02, 4);
    const DataFitMap map = error_map(sys, grid, Matrix(y), LeadfieldMode::Exact, nullptr, -1,
                                     MapNormalization::MinNormalized, 2);
    const ConductivityEstimate est = estimate_conductivity(map);

    REQUIRE(static_cast<Index>(est.profile.size()) == grid.axes()[0].count);
    for (std::size_t k = 0; k < est.profile.size(); ++k) {
        const ProfileEntry& p = est.profile[k];
        CHECK(p.sigma[0] == p.axis_value);
        // Conditional minimum over the block sharing this first-axis value.
        for (Index s = 0; s < grid.size(); ++s) {
            if (grid[s][0] == p.axis_value && map.valid[static_cast<std::size_t>(s)]) {
                CHECK(p.value <= map.values[static_cast<std::size_t>(s)]);
            }
        }
    }
}

TEST_CASE("estimation rejects maps with no valid samples", "[estimation]") {
    DataFitMap map;
    map.grid = small_grid(3);
    map.values.assign(static_cast<std::size_t>(map.grid.size()), 1.0);
    map.valid.assign(static_cast<std::size_t>(map.grid.size()), 0);
    map.best_source.assign(static_cast<std::size_t>(map.grid.size()), -1);
    CHECK_THROWS_AS(estimate_conductivity(map), NumericalError);
}
