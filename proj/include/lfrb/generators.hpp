#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/numerics.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <utility>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Voxel head model
//
// Finite-volume discretization of a conservation law on a regular cell grid
// with nested regions of constant conductivity. Face conductances between
// cells of the same region accumulate into that region's component, so the
// head matrix decomposes exactly as sum_r sigma_r * Hbar_r; faces between two
// regions are assigned to the inner region's component. Sources are adjacent
// monopole pairs of strength +-1/h; electrodes select boundary cells.
// ---------------------------------------------------------------------------

/// Axis-aligned inclusive cell box.
struct CellBox {
    std::array<Index, 3> lo{0, 0, 0};
    std::array<Index, 3> hi{0, 0, 0};

    [[nodiscard]] bool contains(Index x, Index y, Index z) const {
        return x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] && z >= lo[2] && z <= hi[2];
    }
    [[nodiscard]] bool inside(const CellBox& outer) const {
        for (int d = 0; d < 3; ++d) {
            if (lo[d] <= outer.lo[d] || hi[d] >= outer.hi[d]) return false;
        }
        return true;
    }
};

/// Fully resolved voxel head description.
struct VoxelHeadSpec {
    std::array<Index, 3> shape{0, 0, 0};
    Index n_regions = 0;
    std::vector<int> labels;  ///< per cell, 1..n_regions, innermost region is 1
    std::vector<Index> electrode_cells;
    std::vector<std::pair<Index, Index>> source_pairs;  ///< face-adjacent cells
    double spacing = 0.01;                              ///< cell size, meters
    ConductivityPoint reference_sigma;                  ///< deflation scale reference

    [[nodiscard]] Index n_cells() const { return shape[0] * shape[1] * shape[2]; }
    [[nodiscard]] Index cell_index(Index x, Index y, Index z) const {
        return (x * shape[1] + y) * shape[2] + z;
    }
    [[nodiscard]] std::array<Index, 3> cell_coords(Index c) const {
        return {c / (shape[1] * shape[2]), (c / shape[2]) % shape[1], c % shape[2]};
    }
    [[nodiscard]] bool on_boundary(Index c) const {
        const auto [x, y, z] = cell_coords(c);
        return x == 0 || y == 0 || z == 0 || x == shape[0] - 1 || y == shape[1] - 1 ||
               z == shape[2] - 1;
    }
};

namespace detail {

inline void validate_voxel_spec(const VoxelHeadSpec& spec) {
    if (spec.shape[0] < 2 || spec.shape[1] < 2 || spec.shape[2] < 2) {
        throw ConfigError("voxel head needs at least 2 cells per axis");
    }
    if (spec.n_regions < 1) throw ConfigError("voxel head needs at least one region");
    if (static_cast<Index>(spec.labels.size()) != spec.n_cells()) {
        throw ConfigError("label map has " + std::to_string(spec.labels.size()) +
                          " entries, expected " + std::to_string(spec.n_cells()));
    }
    std::vector<Index> region_count(static_cast<std::size_t>(spec.n_regions), 0);
    for (int label : spec.labels) {
        if (label < 1 || label > spec.n_regions) {
            throw ConfigError("cell label " + std::to_string(label) + " outside 1.." +
                              std::to_string(spec.n_regions));
        }
        ++region_count[static_cast<std::size_t>(label - 1)];
    }
    for (Index r = 0; r < spec.n_regions; ++r) {
        if (region_count[static_cast<std::size_t>(r)] == 0) {
            throw ConfigError("region " + std::to_string(r + 1) + " has no cells");
        }
    }
    if (!(spec.spacing > 0.0)) throw ConfigError("cell spacing must be positive");

    // Breadth-first search over the 6-neighborhood; a split domain would leave
    // extra kernel vectors that deflation cannot remove.
    std::vector<char> seen(static_cast<std::size_t>(spec.n_cells()), 0);
    std::deque<Index> queue{0};
    seen[0] = 1;
    Index visited = 0;
    while (!queue.empty()) {
        const Index c = queue.front();
        queue.pop_front();
        ++visited;
        const auto [x, y, z] = spec.cell_coords(c);
        const std::array<std::array<Index, 3>, 6> neighbors = {{{x - 1, y, z},
                                                                {x + 1, y, z},
                                                                {x, y - 1, z},
                                                                {x, y + 1, z},
                                                                {x, y, z - 1},
                                                                {x, y, z + 1}}};
        for (const auto& nb : neighbors) {
            if (nb[0] < 0 || nb[1] < 0 || nb[2] < 0 || nb[0] >= spec.shape[0] ||
                nb[1] >= spec.shape[1] || nb[2] >= spec.shape[2]) {
                continue;
            }
            const Index m = spec.cell_index(nb[0], nb[1], nb[2]);
            if (!seen[static_cast<std::size_t>(m)]) {
                seen[static_cast<std::size_t>(m)] = 1;
                queue.push_back(m);
            }
        }
    }
    if (visited != spec.n_cells()) throw ConfigError("voxel head domain is disconnected");

    if (spec.electrode_cells.empty()) throw ConfigError("voxel head needs electrode cells");
    for (Index c : spec.electrode_cells) {
        if (c < 0 || c >= spec.n_cells()) throw ConfigError("electrode cell index out of range");
        if (!spec.on_boundary(c)) {
            throw ConfigError("electrode cell " + std::to_string(c) +
                              " is not on the outer boundary");
        }
        if (spec.labels[static_cast<std::size_t>(c)] != spec.n_regions) {
            throw ConfigError("electrode cell " + std::to_string(c) +
                              " is not in the outermost region");
        }
    }
    if (spec.source_pairs.empty()) throw ConfigError("voxel head needs source pairs");
    for (const auto& [a, b] : spec.source_pairs) {
        if (a < 0 || b < 0 || a >= spec.n_cells() || b >= spec.n_cells()) {
            throw ConfigError("source cell index out of range");
        }
        if (spec.labels[static_cast<std::size_t>(a)] != 1 ||
            spec.labels[static_cast<std::size_t>(b)] != 1) {
            throw ConfigError("source pair (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") is not inside the innermost region");
        }
        const auto ca = spec.cell_coords(a);
        const auto cb = spec.cell_coords(b);
        const Index manhattan = std::abs(ca[0] - cb[0]) + std::abs(ca[1] - cb[1]) +
                                std::abs(ca[2] - cb[2]);
        if (manhattan != 1) {
            throw ConfigError("source pair (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") is not face-adjacent");
        }
    }
    if (spec.reference_sigma.size() != 0 && spec.reference_sigma.size() != spec.n_regions) {
        throw ConfigError("reference conductivity has wrong compartment count");
    }
}

}  // namespace detail

/// Builds the parametrized system for a voxel head. Each region contributes
/// a unit-conductivity face-conductance component with multiplier sigma_r;
/// one extra rank-one component with constant multiplier removes the
/// constant-vector kernel. The source matrix is conductivity-independent.
inline ParametrizedSystem build_voxel_head(const VoxelHeadSpec& spec) {
    detail::validate_voxel_spec(spec);
    const Index n = spec.n_cells();
    const double t = spec.spacing;  // face conductance at unit conductivity

    ParametrizedSystem sys;
    sys.n_unknowns = n;
    sys.n_electrodes = static_cast<Index>(spec.electrode_cells.size());
    sys.n_sources = static_cast<Index>(spec.source_pairs.size());
    sys.n_compartments = spec.n_regions;

    for (Index r = 0; r < spec.n_regions; ++r) {
        sys.h_components.push_back({Matrix::Zero(n, n), MultiplierSpec::linear(r)});
    }
    for (Index x = 0; x < spec.shape[0]; ++x) {
        for (Index y = 0; y < spec.shape[1]; ++y) {
            for (Index z = 0; z < spec.shape[2]; ++z) {
                const Index c = spec.cell_index(x, y, z);
                const std::array<std::array<Index, 3>, 3> forward = {{{x + 1, y, z},
                                                                      {x, y + 1, z},
                                                                      {x, y, z + 1}}};
                for (const auto& nb : forward) {
                    if (nb[0] >= spec.shape[0] || nb[1] >= spec.shape[1] ||
                        nb[2] >= spec.shape[2]) {
                        continue;
                    }
                    const Index m = spec.cell_index(nb[0], nb[1], nb[2]);
                    const int owner = std::min(spec.labels[static_cast<std::size_t>(c)],
                                               spec.labels[static_cast<std::size_t>(m)]);
                    Matrix& h = sys.h_components[static_cast<std::size_t>(owner - 1)].matrix;
                    h(c, c) += t;
                    h(m, m) += t;
                    h(c, m) -= t;
                    h(m, c) -= t;
                }
            }
        }
    }

    // Deflation: w spans the kernel of the undeflated assembly; the scale is
    // matched to the mean diagonal at the reference conductivity so the shift
    // neither dominates nor vanishes anywhere in the domain of interest.
    const ConductivityPoint ref =
        spec.reference_sigma.size() == spec.n_regions
            ? spec.reference_sigma
            : ConductivityPoint(std::vector<double>(static_cast<std::size_t>(spec.n_regions), 1.0));
    double ref_trace = 0.0;
    for (Index r = 0; r < spec.n_regions; ++r) {
        ref_trace += ref[r] * sys.h_components[static_cast<std::size_t>(r)].matrix.trace();
    }
    const double scale = ref_trace / static_cast<double>(n);
    Vector w = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Matrix shift = scale * (w * w.transpose());
    sys.h_components.push_back({std::move(shift), MultiplierSpec::constant(1.0)});
    sys.deflation = Deflation{std::move(w), scale, spec.n_regions};

    Matrix d = Matrix::Zero(n, sys.n_sources);
    for (Index s = 0; s < sys.n_sources; ++s) {
        const auto& [a, b] = spec.source_pairs[static_cast<std::size_t>(s)];
        d(a, s) = 1.0 / spec.spacing;
        d(b, s) = -1.0 / spec.spacing;
    }
    sys.d_components.push_back({std::move(d), MultiplierSpec::constant(1.0)});

    Matrix selection = Matrix::Zero(sys.n_electrodes, n);
    for (Index e = 0; e < sys.n_electrodes; ++e) {
        selection(e, spec.electrode_cells[static_cast<std::size_t>(e)]) = 1.0;
    }
    sys.selection = std::move(selection);

    sys.validate();
    return sys;
}

/// Expands nested boxes into a voxel spec, auto-placing electrodes on the
/// outer surface and source pairs in the innermost region, both spread
/// deterministically over the index-ordered candidates. `boxes` lists the
/// inner regions, innermost first; everything else is the outermost region.
inline VoxelHeadSpec voxel_head_from_boxes(std::array<Index, 3> shape,
                                           const std::vector<CellBox>& boxes, Index n_electrodes,
                                           Index n_sources, double spacing,
                                           ConductivityPoint reference_sigma = {}) {
    VoxelHeadSpec spec;
    spec.shape = shape;
    spec.n_regions = static_cast<Index>(boxes.size()) + 1;
    spec.spacing = spacing;
    spec.reference_sigma = std::move(reference_sigma);

    const CellBox grid_box{{0, 0, 0}, {shape[0] - 1, shape[1] - 1, shape[2] - 1}};
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        const CellBox& outer = (k + 1 < boxes.size()) ? boxes[k + 1] : grid_box;
        if (!boxes[k].inside(outer)) {
            throw ConfigError("region box " + std::to_string(k + 1) +
                              " must lie strictly inside the next region");
        }
    }

    spec.labels.resize(static_cast<std::size_t>(spec.n_cells()));
    for (Index x = 0; x < shape[0]; ++x) {
        for (Index y = 0; y < shape[1]; ++y) {
            for (Index z = 0; z < shape[2]; ++z) {
                int label = static_cast<int>(spec.n_regions);
                for (std::size_t k = 0; k < boxes.size(); ++k) {
                    if (boxes[k].contains(x, y, z)) {
                        label = static_cast<int>(k) + 1;
                        break;
                    }
                }
                spec.labels[static_cast<std::size_t>(spec.cell_index(x, y, z))] = label;
            }
        }
    }

    std::vector<Index> surface;
    for (Index c = 0; c < spec.n_cells(); ++c) {
        if (spec.on_boundary(c) &&
            spec.labels[static_cast<std::size_t>(c)] == spec.n_regions) {
            surface.push_back(c);
        }
    }
    if (static_cast<Index>(surface.size()) < n_electrodes) {
        throw ConfigError("only " + std::to_string(surface.size()) +
                          " surface cells available for " + std::to_string(n_electrodes) +
                          " electrodes");
    }
    for (Index e = 0; e < n_electrodes; ++e) {
        spec.electrode_cells.push_back(
            surface[static_cast<std::size_t>(e * static_cast<Index>(surface.size()) /
                                             n_electrodes)]);
    }

    std::vector<std::pair<Index, Index>> candidates;
    for (Index x = 0; x + 1 < shape[0]; ++x) {
        for (Index y = 0; y < shape[1]; ++y) {
            for (Index z = 0; z < shape[2]; ++z) {
                const Index a = spec.cell_index(x, y, z);
                const Index b = spec.cell_index(x + 1, y, z);
                if (spec.labels[static_cast<std::size_t>(a)] == 1 &&
                    spec.labels[static_cast<std::size_t>(b)] == 1) {
                    candidates.emplace_back(a, b);
                }
            }
        }
    }
    if (static_cast<Index>(candidates.size()) < n_sources) {
        throw ConfigError("only " + std::to_string(candidates.size()) +
                          " source-pair slots available for " + std::to_string(n_sources) +
                          " sources");
    }
    for (Index s = 0; s < n_sources; ++s) {
        spec.source_pairs.push_back(
            candidates[static_cast<std::size_t>(s * static_cast<Index>(candidates.size()) /
                                                n_sources)]);
    }
    return spec;
}

/// Desk-scale default: 16^3 cells, three nested regions, 32 electrodes,
/// 128 sources, 1 cm spacing. The deflation reference sits at the center of
/// the default conductivity domain.
inline VoxelHeadSpec default_voxel_head_spec() {
    return voxel_head_from_boxes(
        {16, 16, 16},
        {CellBox{{5, 5, 5}, {10, 10, 10}}, CellBox{{3, 3, 3}, {12, 12, 12}}}, 32, 128, 0.01,
        ConductivityPoint({1.25, std::pow(10.0, -2.5), 1.0}));
}

/// Default domain of interest: compartment 0 in [0.5, 2] linear, compartment
/// 1 in [1e-4, 1e-1] log, compartment 2 fixed at 1.
inline std::vector<GridAxis> default_conductivity_domain() {
    return {GridAxis{0.5, 2.0, 15, AxisScale::Linear},
            GridAxis{1e-4, 1e-1, 15, AxisScale::Log},
            GridAxis{1.0, 1.0, 1, AxisScale::Linear}};
}

inline ConductivityGrid default_grid(Index per_axis = 15) {
    auto axes = default_conductivity_domain();
    axes[0].count = per_axis;
    axes[1].count = per_axis;
    return ConductivityGrid::regular(std::move(axes));
}

// ---------------------------------------------------------------------------
// Synthetic systems
//
// Random dense systems with the multiplier structure of a boundary-element
// assembly, for stress tests that do not need physical meaning. Components
// are positive definite by construction, so the assembled head matrix is SPD
// for every positive conductivity and no deflation is required.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    Index n_unknowns = 64;
    Index n_compartments = 2;
    Index n_electrodes = 8;
    Index n_sources = 10;

    // Head-multiplier family: one component per compartment and family member.
    bool gamma_linear = true;    ///< sigma_k
    bool gamma_inverse = false;  ///< 1/sigma_k
    bool gamma_pair_sum = false; ///< sigma_k + sigma_{k+1}
    bool gamma_constant = false; ///< 1

    // Source-multiplier family.
    bool lambda_constant = true; ///< 1
    bool lambda_linear = false;  ///< sigma_k

    std::uint64_t seed = 1;
    double conditioning_floor = 1e-3;
};

/// Deterministic for a fixed seed, bit for bit.
inline ParametrizedSystem build_synthetic_system(const SyntheticSpec& spec) {
    if (spec.n_unknowns < 2 || spec.n_compartments < 1 || spec.n_electrodes < 1 ||
        spec.n_sources < 1) {
        throw ConfigError("synthetic spec dimensions must be positive");
    }
    if (spec.n_electrodes > spec.n_unknowns) {
        throw ConfigError("synthetic spec needs n_electrodes <= n_unknowns");
    }
    if (!(spec.conditioning_floor > 0.0)) {
        throw ConfigError("conditioning floor must be positive");
    }
    if (!spec.lambda_constant && !spec.lambda_linear) {
        throw ConfigError("synthetic spec needs at least one source multiplier");
    }

    std::vector<MultiplierSpec> gammas;
    if (spec.gamma_linear) {
        for (Index k = 0; k < spec.n_compartments; ++k) gammas.push_back(MultiplierSpec::linear(k));
    }
    if (spec.gamma_inverse) {
        for (Index k = 0; k < spec.n_compartments; ++k) gammas.push_back(MultiplierSpec::inverse(k));
    }
    if (spec.gamma_pair_sum) {
        for (Index k = 0; k + 1 < spec.n_compartments; ++k) {
            gammas.push_back(MultiplierSpec::pair_sum(k, k + 1));
        }
    }
    if (spec.gamma_constant) gammas.push_back(MultiplierSpec::constant(1.0));
    if (gammas.empty()) throw ConfigError("synthetic spec needs at least one head multiplier");

    std::vector<MultiplierSpec> lambdas;
    if (spec.lambda_constant) lambdas.push_back(MultiplierSpec::constant(1.0));
    if (spec.lambda_linear) {
        for (Index k = 0; k < spec.n_compartments; ++k) lambdas.push_back(MultiplierSpec::linear(k));
    }

    Rng rng(spec.seed);
    const Index n = spec.n_unknowns;
    const Index n_h = static_cast<Index>(gammas.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    ParametrizedSystem sys;
    sys.n_unknowns = n;
    sys.n_electrodes = spec.n_electrodes;
    sys.n_sources = spec.n_sources;
    sys.n_compartments = spec.n_compartments;

    for (const MultiplierSpec& gamma : gammas) {
        Matrix b(n, n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) b(i, j) = rng.normal() * scale;
        }
        Matrix h = b.transpose() * b;
        h.diagonal().array() += spec.conditioning_floor / static_cast<double>(n_h);
        // Mirror the upper triangle so the component is symmetric bit for bit.
        for (Index i = 1; i < n; ++i) {
            for (Index j = 0; j < i; ++j) h(i, j) = h(j, i);
        }
        sys.h_components.push_back({std::move(h), gamma});
    }

    for (const MultiplierSpec& lambda : lambdas) {
        Matrix d(n, spec.n_sources);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < spec.n_sources; ++j) d(i, j) = rng.normal() * scale;
        }
        sys.d_components.push_back({std::move(d), lambda});
    }

    Matrix selection = Matrix::Zero(spec.n_electrodes, n);
    const std::vector<Index> cells = rng.sample_without_replacement(n, spec.n_electrodes);
    for (Index e = 0; e < spec.n_electrodes; ++e) {
        selection(e, cells[static_cast<std::size_t>(e)]) = 1.0;
    }
    sys.selection = std::move(selection);

    sys.validate();
    return sys;
}

// ---------------------------------------------------------------------------
// Simulated measurements
// ---------------------------------------------------------------------------

/// One topography: amplitude * exact lead-field column + seeded white noise.
inline Vector simulate_topography(const ParametrizedSystem& sys, const ConductivityPoint& sigma,
                                  Index source_index, double amplitude, double noise_std,
                                  std::uint64_t seed) {
    if (source_index < 0 || source_index >= sys.n_sources) {
        throw ConfigError("source index " + std::to_string(source_index) + " outside 0.." +
                          std::to_string(sys.n_sources - 1));
    }
    const Matrix lead = exact_lead_field(sys, sigma);
    Vector y = amplitude * lead.col(source_index);
    if (noise_std > 0.0) {
        Rng rng(seed);
        for (Index e = 0; e < y.size(); ++e) y[e] += noise_std * rng.normal();
    }
    return y;
}

}  // namespace lfrb
