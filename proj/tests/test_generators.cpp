#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lfrb;
using namespace lfrb::testing;
using Catch::Matchers::WithinRel;

TEST_CASE("single-region components are graph Laplacians", "[generators]") {
    const VoxelHeadSpec spec = voxel_head_from_boxes({3, 3, 3}, {}, 4, 2, 0.01);
    const ParametrizedSystem sys = build_voxel_head(spec);
    REQUIRE(sys.h_components.size() == 2);  // one region + deflation

    const Matrix& laplacian = sys.h_components[0].matrix;
    CHECK(laplacian.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((laplacian - laplacian.transpose()).norm() == 0.0);

    Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian, Eigen::EigenvaluesOnly);
    Index null_count = 0;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (std::abs(es.eigenvalues()[i]) <= 1e-12 * es.eigenvalues().maxCoeff()) ++null_count;
    }
    CHECK(null_count == 1);  // kernel is exactly the constant vector
}

TEST_CASE("region components partition the full Laplacian", "[generators]") {
    const VoxelHeadSpec nested = micro_voxel_spec();
    const ParametrizedSystem sys = build_voxel_head(nested);
    const VoxelHeadSpec single = voxel_head_from_boxes(nested.shape, {}, 4, 2, nested.spacing);
    const ParametrizedSystem whole = build_voxel_head(single);

    Matrix sum = Matrix::Zero(sys.n_unknowns, sys.n_unknowns);
    for (Index r = 0; r < sys.n_compartments; ++r) {
        sum += sys.h_components[static_cast<std::size_t>(r)].matrix;
    }
    CHECK((sum - whole.h_components[0].matrix).norm() <= 1e-13);
}

TEST_CASE("per-region row sums vanish", "[generators]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    for (Index r = 0; r < sys.n_compartments; ++r) {
        const Matrix& h = sys.h_components[static_cast<std::size_t>(r)].matrix;
        CHECK(h.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("undeflated kernel is exactly the constant vector", "[generators]") {
    const ParametrizedSystem sys = build_voxel_head(micro_voxel_spec());
    const ConductivityPoint sigma({1.3, 0.02, 0.8});
    Matrix undeflated = Matrix::Zero(sys.n_unknowns, sys.n_unknowns);
    for (Index r = 0; r < sys.n_compartments; ++r) {
        undeflated += sigma[r] * sys.h_components[static_cast<std::size_t>(r)].matrix;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(undeflated, Eigen::EigenvaluesOnly);
    CHECK(std::abs(es.eigenvalues()[0]) <= 1e-12 * es.eigenvalues().maxCoeff());
    CHECK(es.eigenvalues()[1] > 1e-12 * es.eigenvalues().maxCoeff());
}

TEST_CASE("shared conductivity scales potentials inversely", "[generators]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const Matrix at_one = exact_lead_field(sys, ConductivityPoint({1.0, 1.0, 1.0}));
    const Matrix at_three = exact_lead_field(sys, ConductivityPoint({3.0, 3.0, 3.0}));
    CHECK((at_three - at_one / 3.0).norm() <= 1e-9 * at_one.norm());
}

TEST_CASE("source columns are zero-sum monopole pairs", "[generators]") {
    const VoxelHeadSpec spec = tiny_voxel_spec();
    const ParametrizedSystem sys = build_voxel_head(spec);
    const Matrix& d = sys.d_components[0].matrix;
    CHECK(d.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
    for (Index s = 0; s < sys.n_sources; ++s) {
        CHECK(Vector(d.col(s)).cwiseAbs().maxCoeff() == 1.0 / spec.spacing);
    }
}

TEST_CASE("voxel spec validation rejects bad placements", "[generators]") {
    VoxelHeadSpec spec = tiny_voxel_spec();

    SECTION("electrode off the boundary") {
        spec.electrode_cells[0] = spec.cell_index(3, 3, 3);
        CHECK_THROWS_AS(build_voxel_head(spec), ConfigError);
    }
    SECTION("source pair outside the innermost region") {
        spec.source_pairs[0] = {spec.cell_index(0, 0, 0), spec.cell_index(1, 0, 0)};
        CHECK_THROWS_AS(build_voxel_head(spec), ConfigError);
    }
    SECTION("source pair not face-adjacent") {
        spec.source_pairs[0] = {spec.cell_index(2, 2, 2), spec.cell_index(4, 2, 2)};
        CHECK_THROWS_AS(build_voxel_head(spec), ConfigError);
    }
    SECTION("label out of range") {
        spec.labels[10] = 9;
        CHECK_THROWS_AS(build_voxel_head(spec), ConfigError);
    }
    SECTION("boxes must nest") {
        CHECK_THROWS_AS(
            voxel_head_from_boxes({8, 8, 8},
                                  {CellBox{{1, 1, 1}, {6, 6, 6}}, CellBox{{2, 2, 2}, {5, 5, 5}}},
                                  8, 4, 0.01),
            ConfigError);
    }
}

TEST_CASE("synthetic systems are deterministic in the seed", "[generators]") {
    SyntheticSpec spec;
    spec.seed = 42;
    const ParametrizedSystem a = build_synthetic_system(spec);
    const ParametrizedSystem b = build_synthetic_system(spec);
    for (std::size_t i = 0; i < a.h_components.size(); ++i) {
        CHECK((a.h_components[i].matrix.array() == b.h_components[i].matrix.array()).all());
    }
    CHECK((a.selection.array() == b.selection.array()).all());

    spec.seed = 43;
    const ParametrizedSystem c = build_synthetic_system(spec);
    CHECK((a.h_components[0].matrix - c.h_components[0].matrix).norm() > 0.0);
}

TEST_CASE("synthetic head matrices stay positive definite on the domain", "[generators]") {
    SyntheticSpec spec;
    spec.n_compartments = 2;
    spec.gamma_inverse = true;
    spec.conditioning_floor = 1e-3;
    const ParametrizedSystem sys = build_synthetic_system(spec);
    const Index n_h = static_cast<Index>(sys.h_components.size());

    for (const auto& sigma :
         {ConductivityPoint({0.5, 0.5}), ConductivityPoint({2.0, 0.5}),
          ConductivityPoint({1.0, 2.0})}) {
        const Matrix head = assemble_head(sys, sigma);
        Eigen::SelfAdjointEigenSolver<Matrix> es(head, Eigen::EigenvaluesOnly);
        double min_gamma = std::numeric_limits<double>::infinity();
        for (const auto& c : sys.h_components) {
            min_gamma = std::min(min_gamma, c.multiplier.evaluate(sigma));
        }
        CHECK(es.eigenvalues()[0] >=
              spec.conditioning_floor * min_gamma / static_cast<double>(n_h));
    }
}

TEST_CASE("the full multiplier family shows up in the components", "[generators]") {
    SyntheticSpec spec;
    spec.n_compartments = 3;
    spec.gamma_linear = true;
    spec.gamma_inverse = true;
    spec.gamma_pair_sum = true;
    spec.gamma_constant = true;
    const ParametrizedSystem sys = build_synthetic_system(spec);

    CHECK(sys.h_components.size() >= 3);
    bool has_inverse = false;
    for (const auto& c : sys.h_components) {
        for (const auto& t : c.multiplier.terms) {
            if (t.power == -1) has_inverse = true;
        }
    }
    CHECK(has_inverse);
}

TEST_CASE("noiseless simulation is a scaled lead-field column", "[generators]") {
    const ParametrizedSystem sys = build_voxel_head(tiny_voxel_spec());
    const ConductivityPoint sigma({1.25, 0.01, 1.0});
    const Vector y = simulate_topography(sys, sigma, 7, 2.5, 0.0, 99);
    const Matrix lead = exact_lead_field(sys, sigma);
    CHECK((y - 2.5 * lead.col(7)).norm() == 0.0);
}

TEST_CASE("zero amplitude leaves pure reproducible noise", "[generators]") {
    const ParametrizedSystem sys = synth_one_compartment();
    const ConductivityPoint sigma({1.0});
    const Vector a = simulate_topography(sys, sigma, 0, 0.0, 0.3, 7);
    const Vector b = simulate_topography(sys, sigma, 0, 0.0, 0.3, 7);
    const Vector c = simulate_topography(sys, sigma, 0, 0.0, 0.3, 8);
    CHECK(a.norm() > 0.0);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() > 0.0);

    Rng rng(7);
    Vector oracle(sys.n_electrodes);
    for (Index e = 0; e < sys.n_electrodes; ++e) oracle[e] = 0.3 * rng.normal();
    CHECK((a - oracle).norm() == 0.0);
}

TEST_CASE("simulation validates the source index", "[generators]") {
    const ParametrizedSystem sys = synth_one_compartment();
    CHECK_THROWS_AS(simulate_topography(sys, ConductivityPoint({1.0}), 99, 1.0, 0.0, 1),
                    ConfigError);
}
