#pragma once

#include "lfrb/lfrb.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace lfrb::testing {

/// 8^3 voxel head: three nested regions, 8 electrodes, 12 sources.
inline VoxelHeadSpec tiny_voxel_spec() {
    return voxel_head_from_boxes({8, 8, 8},
                                 {CellBox{{2, 2, 2}, {5, 5, 5}}, CellBox{{1, 1, 1}, {6, 6, 6}}},
                                 8, 12, 0.01, ConductivityPoint({1.25, 0.0031622776601683794, 1.0}));
}

/// 6^3 voxel head for eigen-decomposition heavy checks.
inline VoxelHeadSpec micro_voxel_spec() {
    return voxel_head_from_boxes({6, 6, 6},
                                 {CellBox{{2, 2, 2}, {3, 3, 3}}, CellBox{{1, 1, 1}, {4, 4, 4}}},
                                 6, 4, 0.01, ConductivityPoint({1.25, 0.0031622776601683794, 1.0}));
}

/// Default-domain grid at a reduced sample count.
inline ConductivityGrid small_grid(Index per_axis = 5) {
    auto axes = default_conductivity_domain();
    axes[0].count = per_axis;
    axes[1].count = per_axis;
    return ConductivityGrid::regular(std::move(axes));
}

/// One-compartment synthetic system with multiplier sigma_0: the assembled
/// head matrix is exactly homogeneous in the conductivity.
inline ParametrizedSystem synth_one_compartment(Index n = 32, std::uint64_t seed = 7) {
    SyntheticSpec spec;
    spec.n_unknowns = n;
    spec.n_compartments = 1;
    spec.n_electrodes = 4;
    spec.n_sources = 5;
    spec.seed = seed;
    return build_synthetic_system(spec);
}

/// Two-compartment synthetic system with the richer multiplier families.
inline ParametrizedSystem synth_two_compartment(Index n = 48, std::uint64_t seed = 11) {
    SyntheticSpec spec;
    spec.n_unknowns = n;
    spec.n_compartments = 2;
    spec.n_electrodes = 6;
    spec.n_sources = 8;
    spec.gamma_linear = true;
    spec.gamma_inverse = true;
    spec.lambda_constant = true;
    spec.lambda_linear = true;
    spec.seed = seed;
    return build_synthetic_system(spec);
}

inline ConductivityGrid square_grid(double lo, double hi, Index count) {
    return ConductivityGrid::regular({GridAxis{lo, hi, count, AxisScale::Linear},
                                      GridAxis{lo, hi, count, AxisScale::Linear}});
}

/// Fresh unique directory under the system temp root.
inline std::filesystem::path make_temp_dir(const std::string& prefix) {
    static std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto path = std::filesystem::temp_directory_path() /
                    (prefix + "-" + std::to_string(rng()));
        std::error_code ec;
        if (std::filesystem::create_directories(path, ec)) return path;
    }
    throw IoError("cannot create a temp directory for tests");
}

/// Materializes the regressor matrix column by column: column (i, j) is the
/// vectorization of rows_i * Hbar_j. Test-only oracle; the library never
/// forms this matrix.
inline Matrix materialize_regressor(const ParametrizedSystem& sys,
                                    const std::vector<ReducedRows>& supports) {
    const Index n_h = static_cast<Index>(sys.h_components.size());
    const Index rows = sys.n_electrodes * sys.n_unknowns;
    Matrix k(rows, static_cast<Index>(supports.size()) * n_h);
    for (std::size_t i = 0; i < supports.size(); ++i) {
        for (Index j = 0; j < n_h; ++j) {
            const Matrix product = supports[i].rows * sys.h_components[static_cast<std::size_t>(j)].matrix;
            k.col(static_cast<Index>(i) * n_h + j) =
                Eigen::Map<const Vector>(product.data(), product.size());
        }
    }
    return k;
}

inline Vector vectorize(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace lfrb::testing
