#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lfrb;
using namespace lfrb::testing;
using Catch::Matchers::WithinRel;

namespace {

/// One-compartment system whose lead field is exactly L(1) / sigma.
ParametrizedSystem inverse_scaling_system() { return synth_one_compartment(24, 15); }

/// System with a constant head multiplier: the lead field ignores sigma.
ParametrizedSystem constant_field_system() {
    SyntheticSpec spec;
    spec.n_unknowns = 20;
    spec.n_compartments = 1;
    spec.n_electrodes = 4;
    spec.n_sources = 5;
    spec.gamma_linear = false;
    spec.gamma_constant = true;
    spec.seed = 33;
    return build_synthetic_system(spec);
}

}  // namespace

TEST_CASE("a single node gives the constant model", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    const PolyModel model = poly_fit(sys, 0, {0.7}, base);
    const Matrix node_field = exact_lead_field(sys, ConductivityPoint({0.7}));
    CHECK((poly_eval(model, 0.7).leadfield - node_field).norm() == 0.0);
    CHECK((poly_eval(model, 1.9).leadfield - node_field).norm() <= 1e-12 * node_field.norm());
}

TEST_CASE("two nodes interpolate linearly and exactly at the nodes", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    const PolyModel model = poly_fit(sys, 0, {0.5, 2.0}, base);

    const Matrix at_lo = exact_lead_field(sys, ConductivityPoint({0.5}));
    const Matrix at_hi = exact_lead_field(sys, ConductivityPoint({2.0}));
    CHECK((poly_eval(model, 0.5).leadfield - at_lo).norm() <= 1e-8 * at_lo.norm());
    CHECK((poly_eval(model, 2.0).leadfield - at_hi).norm() <= 1e-8 * at_hi.norm());

    const Matrix mid = poly_eval(model, 1.25).leadfield;
    const Matrix oracle = 0.5 * (at_lo + at_hi);  // midpoint of a linear model
    CHECK((mid - oracle).norm() <= 1e-12 * oracle.norm());
}

TEST_CASE("node lead fields are reproduced for every degree", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    const std::vector<double> nodes = uniform_nodes(0.5, 2.0, 6);
    const PolyModel model = poly_fit(sys, 0, nodes, base);
    for (double node : nodes) {
        const Matrix exact = exact_lead_field(sys, ConductivityPoint({node}));
        CHECK((poly_eval(model, node).leadfield - exact).norm() <= 1e-8 * exact.norm());
    }
}

TEST_CASE("sigma-independent lead fields are reproduced anywhere", "[poly]") {
    const ParametrizedSystem sys = constant_field_system();
    const ConductivityPoint base({1.0});
    const PolyModel model = poly_fit(sys, 0, uniform_nodes(0.5, 2.0, 5), base);
    const Matrix reference = exact_lead_field(sys, ConductivityPoint({1.0}));
    for (double q : {0.55, 0.9, 1.3, 1.99}) {
        CHECK((poly_eval(model, q).leadfield - reference).norm() <= 1e-9 * reference.norm());
    }
}

TEST_CASE("uniform nodes fail badly on inverse scaling near the left edge", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    const std::vector<double> nodes = uniform_nodes(1e-4, 1e-1, 12);
    const PolyModel model = poly_fit(sys, 0, nodes, base);

    // Scalar oracle: the lead field is L(1)/sigma entrywise, so the matrix
    // interpolation error equals the scalar interpolation error of 1/sigma.
    const Matrix at_one = exact_lead_field(sys, ConductivityPoint({1.0}));
    std::vector<double> t(nodes.size()), w(nodes.size(), 1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        t[i] = 2.0 * (nodes[i] - 1e-4) / (1e-1 - 1e-4) - 1.0;
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (i != j) w[i] /= (t[i] - t[j]);
        }
    }
    auto scalar_interp = [&](double q) {
        const double tq = 2.0 * (q - 1e-4) / (1e-1 - 1e-4) - 1.0;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double c = w[i] / (tq - t[i]);
            num += c / nodes[i];
            den += c;
        }
        return num / den;
    };

    const double q = 1e-3;
    const Matrix approx = poly_eval(model, q).leadfield;
    const Matrix oracle = scalar_interp(q) * at_one;
    CHECK((approx - oracle).norm() <= 1e-8 * oracle.norm());

    const Matrix exact = exact_lead_field(sys, ConductivityPoint({q}));
    const double rel_error = (approx - exact).norm() / exact.norm();
    CHECK(rel_error > 1.0);  // observed ~6.4: the baseline collapses here
}

TEST_CASE("the model is linear in the node lead fields", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    const std::vector<double> nodes = uniform_nodes(0.5, 2.0, 4);
    std::vector<Matrix> fields;
    for (double node : nodes) fields.push_back(exact_lead_field(sys, ConductivityPoint({node})));
    const PolyModel model = poly_fit_from_fields(0, nodes, fields, base);

    std::vector<Matrix> doubled;
    for (const Matrix& f : fields) doubled.push_back(2.0 * f);
    const PolyModel twice = poly_fit_from_fields(0, nodes, doubled, base);

    for (double q : {0.6, 1.1, 1.7}) {
        const Matrix a = poly_eval(model, q).leadfield;
        const Matrix b = poly_eval(twice, q).leadfield;
        CHECK((b - 2.0 * a).norm() <= 1e-12 * b.norm());
    }
}

TEST_CASE("extrapolation is answered but flagged", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const PolyModel model = poly_fit(sys, 0, uniform_nodes(0.5, 2.0, 3), ConductivityPoint({1.0}));
    CHECK(poly_eval(model, 2.5).extrapolated);
    CHECK_FALSE(poly_eval(model, 1.0).extrapolated);
}

TEST_CASE("coincident nodes are rejected", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    CHECK_THROWS_AS(poly_fit(sys, 0, {0.5, 0.5}, ConductivityPoint({1.0})), ConfigError);
}

TEST_CASE("log-transformed nodes linearize inverse scaling better", "[poly]") {
    const ParametrizedSystem sys = inverse_scaling_system();
    const ConductivityPoint base({1.0});
    std::vector<double> nodes = uniform_nodes(std::log(1e-4), std::log(1e-1), 8);
    for (double& v : nodes) v = std::exp(v);
    const PolyModel log_model = poly_fit(sys, 0, nodes, base, NodeTransform::Log);
    const PolyModel lin_model =
        poly_fit(sys, 0, uniform_nodes(1e-4, 1e-1, 8), base, NodeTransform::Linear);

    const double q = 1e-3;
    const Matrix exact = exact_lead_field(sys, ConductivityPoint({q}));
    const double log_err = (poly_eval(log_model, q).leadfield - exact).norm() / exact.norm();
    const double lin_err = (poly_eval(lin_model, q).leadfield - exact).norm() / exact.norm();
    CHECK(log_err < lin_err);
}

TEST_CASE("method comparison is exact when evaluation points are the nodes", "[poly]") {
    const ParametrizedSystem sys = synth_two_compartment();
    const ConductivityPoint base({1.0, 1.0});
    // eval_count == n with shared endpoints: evaluation points coincide with
    // the polynomial nodes, and the selection grid contains them as corners.
    const std::vector<ComparisonRow> rows =
        compare_methods(sys, 1, 0.5, 2.0, base, {5}, 5, 2, false, 5);
    REQUIRE(rows.size() == 2);
    for (const ComparisonRow& row : rows) {
        if (row.method == "polynomial") CHECK(row.max_rel_error <= 1e-8);
    }
}

TEST_CASE("comparison output has two rows per basis size", "[poly]") {
    const ParametrizedSystem sys = synth_two_compartment();
    const ConductivityPoint base({1.0, 1.0});
    const std::vector<Index> n_values = {2, 3, 4};
    const std::vector<ComparisonRow> rows =
        compare_methods(sys, 0, 0.5, 2.0, base, n_values, 9, 2, false, 7);
    CHECK(rows.size() == n_values.size() * 2);
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        CHECK(rows[2 * i].method == "reduced-basis");
        CHECK(rows[2 * i].n == n_values[i]);
        CHECK(rows[2 * i + 1].method == "polynomial");
    }
}

TEST_CASE("reduced-basis bounds inherit selection monotonicity", "[poly]") {
    const ParametrizedSystem sys = synth_two_compartment();
    const ConductivityPoint base({1.0, 1.0});
    const std::vector<ComparisonRow> rows =
        compare_methods(sys, 1, 0.5, 2.0, base, {2, 3, 4, 5}, 11, 2, false, 9);
    double previous = std::numeric_limits<double>::infinity();
    for (const ComparisonRow& row : rows) {
        if (row.method != "reduced-basis") continue;
        CHECK(row.max_rel_upper_bound <= previous + 1e-12);
        previous = row.max_rel_upper_bound;
    }
}
