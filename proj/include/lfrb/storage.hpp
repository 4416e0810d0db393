#pragma once

#include "lfrb/common.hpp"
#include "lfrb/io.hpp"
#include "lfrb/model.hpp"
#include "lfrb/reduced_basis.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace lfrb {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// System directories
//
// system.manifest + one container file per component matrix. The rank-one
// deflation component is stored as its vector and scale rather than as a
// dense n_unknowns^2 file; loading rebuilds the dense component, so the
// decomposition seen in memory is identical either way.
// ---------------------------------------------------------------------------

inline void save_system(const ParametrizedSystem& sys, const fs::path& dir) {
    sys.validate();
    fs::create_directories(dir);
    Manifest m;
    m.set("format", "lfrb-system/1");
    m.set("n_unknowns", sys.n_unknowns);
    m.set("n_electrodes", sys.n_electrodes);
    m.set("n_sources", sys.n_sources);
    m.set("n_compartments", sys.n_compartments);

    m.set("h.count", static_cast<Index>(sys.h_components.size()));
    for (std::size_t i = 0; i < sys.h_components.size(); ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        m.set(p + "multiplier", multiplier_to_string(sys.h_components[i].multiplier));
        if (sys.deflation && sys.deflation->component == static_cast<Index>(i)) {
            m.set(p + "rank_one", true);
            continue;
        }
        const std::string file = "H_" + std::to_string(i) + ".lfrb";
        m.set(p + "file", file);
        write_matrix(dir / file, sys.h_components[i].matrix);
    }

    m.set("d.count", static_cast<Index>(sys.d_components.size()));
    for (std::size_t i = 0; i < sys.d_components.size(); ++i) {
        const std::string p = "d." + std::to_string(i) + ".";
        const std::string file = "D_" + std::to_string(i) + ".lfrb";
        m.set(p + "multiplier", multiplier_to_string(sys.d_components[i].multiplier));
        m.set(p + "file", file);
        write_matrix(dir / file, sys.d_components[i].matrix);
    }

    m.set("selection.file", "S.lfrb");
    write_matrix(dir / "S.lfrb", sys.selection);

    m.set("deflation.present", sys.deflation.has_value());
    if (sys.deflation) {
        m.set("deflation.scale", sys.deflation->scale);
        m.set("deflation.component", sys.deflation->component);
        m.set("deflation.vector.file", "deflation_w.lfrb");
        write_vector(dir / "deflation_w.lfrb", sys.deflation->vector);
    }
    m.save(dir / "system.manifest");
}

/// Dimension and multiplier metadata only; never touches component files.
inline SystemInfo load_system_info(const fs::path& dir) {
    const Manifest m = Manifest::load(dir / "system.manifest");
    if (m.require_string("format") != "lfrb-system/1") {
        throw IoError("unsupported system manifest format in " + dir.string());
    }
    SystemInfo info;
    info.n_unknowns = m.require_index("n_unknowns");
    info.n_electrodes = m.require_index("n_electrodes");
    info.n_sources = m.require_index("n_sources");
    info.n_compartments = m.require_index("n_compartments");
    const Index n_h = m.require_index("h.count");
    for (Index i = 0; i < n_h; ++i) {
        info.h_multipliers.push_back(
            multiplier_from_string(m.require_string("h." + std::to_string(i) + ".multiplier")));
    }
    const Index n_d = m.require_index("d.count");
    for (Index i = 0; i < n_d; ++i) {
        info.d_multipliers.push_back(
            multiplier_from_string(m.require_string("d." + std::to_string(i) + ".multiplier")));
    }
    return info;
}

inline ParametrizedSystem load_system(const fs::path& dir) {
    const Manifest m = Manifest::load(dir / "system.manifest");
    if (m.require_string("format") != "lfrb-system/1") {
        throw IoError("unsupported system manifest format in " + dir.string());
    }
    ParametrizedSystem sys;
    sys.n_unknowns = m.require_index("n_unknowns");
    sys.n_electrodes = m.require_index("n_electrodes");
    sys.n_sources = m.require_index("n_sources");
    sys.n_compartments = m.require_index("n_compartments");

    std::optional<Deflation> deflation;
    if (m.require_bool("deflation.present")) {
        Deflation d;
        d.scale = m.require_double("deflation.scale");
        d.component = m.require_index("deflation.component");
        d.vector = read_vector(dir / m.require_string("deflation.vector.file"));
        deflation = std::move(d);
    }

    const Index n_h = m.require_index("h.count");
    for (Index i = 0; i < n_h; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        SystemComponent c;
        c.multiplier = multiplier_from_string(m.require_string(p + "multiplier"));
        if (m.get_bool(p + "rank_one", false)) {
            if (!deflation || deflation->component != i) {
                throw IoError("rank-one component " + std::to_string(i) +
                              " does not match the deflation record");
            }
            c.matrix = deflation->scale * (deflation->vector * deflation->vector.transpose());
        } else {
            c.matrix = read_matrix(dir / m.require_string(p + "file"));
        }
        sys.h_components.push_back(std::move(c));
    }

    const Index n_d = m.require_index("d.count");
    for (Index i = 0; i < n_d; ++i) {
        const std::string p = "d." + std::to_string(i) + ".";
        SystemComponent c;
        c.multiplier = multiplier_from_string(m.require_string(p + "multiplier"));
        c.matrix = read_matrix(dir / m.require_string(p + "file"));
        sys.d_components.push_back(std::move(c));
    }

    sys.selection = read_matrix(dir / m.require_string("selection.file"));
    sys.deflation = std::move(deflation);
    sys.validate();
    return sys;
}

// ---------------------------------------------------------------------------
// Basis directories
//
// basis.manifest + containers for the Gram data, reduced rows, and the
// per-support field blocks, plus the selection trace as CSV. Per-support
// files mean adding a support appends files instead of rewriting them.
// Gram data is persisted in binary64 (the container format); reloaded bases
// therefore evaluate bounds with a coarser floor than freshly built ones.
// ---------------------------------------------------------------------------

inline void write_trace_csv(const SupportBasis& basis, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write trace: " + path.string());
    out << "n_supports,max_rel_upper_bound,argmax_index";
    const Index n_c = basis.info.n_compartments;
    for (Index d = 0; d < n_c; ++d) out << ",argmax_sigma_" << d;
    out << ",gram_min_eig_ratio,any_regularized\n";
    for (const TraceEntry& e : basis.trace) {
        out << e.n_supports << "," << format_double(e.max_rel_upper_bound) << ","
            << e.argmax_index;
        for (Index d = 0; d < n_c; ++d) {
            out << ",";
            if (e.argmax_sigma.size() == n_c) out << format_double(e.argmax_sigma[d]);
        }
        out << "," << format_double(e.gram_min_eig_ratio) << ","
            << (e.any_regularized ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("short trace write: " + path.string());
}

inline void save_basis(const SupportBasis& basis, const fs::path& dir) {
    fs::create_directories(dir);
    Manifest m;
    m.set("format", "lfrb-basis/1");
    m.set("n_supports", basis.size());
    m.set("n_unknowns", basis.info.n_unknowns);
    m.set("n_electrodes", basis.info.n_electrodes);
    m.set("n_sources", basis.info.n_sources);
    m.set("n_compartments", basis.info.n_compartments);
    m.set("h.count", basis.info.n_h());
    for (Index i = 0; i < basis.info.n_h(); ++i) {
        m.set("h." + std::to_string(i) + ".multiplier",
              multiplier_to_string(basis.info.h_multipliers[static_cast<std::size_t>(i)]));
    }
    m.set("d.count", basis.info.n_d());
    for (Index i = 0; i < basis.info.n_d(); ++i) {
        m.set("d." + std::to_string(i) + ".multiplier",
              multiplier_to_string(basis.info.d_multipliers[static_cast<std::size_t>(i)]));
    }
    m.set("grid_id", basis.grid_id);
    m.set("stop_reason", basis.stop_reason);
    m.set("gram.column_order", "support-major: column(i, j) = i * h.count + j");
    m.set("gram.s_norm_sq", static_cast<double>(basis.gram.s_norm_sq));

    for (Index i = 0; i < basis.size(); ++i) {
        const std::string p = "support." + std::to_string(i) + ".";
        m.set(p + "sigma", basis.supports[static_cast<std::size_t>(i)].values());
        if (!basis.reduced.empty()) {
            const std::string file = "reduced_" + std::to_string(i) + ".lfrb";
            m.set(p + "reduced.file", file);
            write_matrix(dir / file, basis.reduced[static_cast<std::size_t>(i)].rows);
        }
        for (Index j = 0; j < basis.info.n_d(); ++j) {
            const std::string file =
                "field_" + std::to_string(i) + "_" + std::to_string(j) + ".lfrb";
            m.set(p + "field." + std::to_string(j) + ".file", file);
            write_matrix(dir / file,
                         basis.support_fields[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        }
    }

    m.set("domain.axes", static_cast<Index>(basis.domain.size()));
    for (std::size_t d = 0; d < basis.domain.size(); ++d) {
        const std::string p = "domain." + std::to_string(d) + ".";
        m.set(p + "lo", basis.domain[d].lo);
        m.set(p + "hi", basis.domain[d].hi);
        m.set(p + "count", basis.domain[d].count);
        m.set(p + "scale", basis.domain[d].scale == AxisScale::Linear ? "lin" : "log");
    }

    write_matrix(dir / "gram.lfrb", basis.gram.gram.cast<double>());
    write_matrix(dir / "gram_rhs.lfrb", Matrix(basis.gram.rhs.cast<double>()));
    write_trace_csv(basis, dir / "trace.csv");
    m.save(dir / "basis.manifest");
}

enum class BasisLoad {
    Online,  ///< Gram data + field blocks; no n_unknowns-sized file is read
    Full     ///< also the reduced rows, for extension and diagnostics
};

inline SupportBasis load_basis(const fs::path& dir, BasisLoad mode = BasisLoad::Online) {
    const Manifest m = Manifest::load(dir / "basis.manifest");
    if (m.require_string("format") != "lfrb-basis/1") {
        throw IoError("unsupported basis manifest format in " + dir.string());
    }
    SupportBasis basis;
    basis.info.n_unknowns = m.require_index("n_unknowns");
    basis.info.n_electrodes = m.require_index("n_electrodes");
    basis.info.n_sources = m.require_index("n_sources");
    basis.info.n_compartments = m.require_index("n_compartments");
    const Index n_h = m.require_index("h.count");
    for (Index i = 0; i < n_h; ++i) {
        basis.info.h_multipliers.push_back(
            multiplier_from_string(m.require_string("h." + std::to_string(i) + ".multiplier")));
    }
    const Index n_d = m.require_index("d.count");
    for (Index j = 0; j < n_d; ++j) {
        basis.info.d_multipliers.push_back(
            multiplier_from_string(m.require_string("d." + std::to_string(j) + ".multiplier")));
    }
    basis.grid_id = m.get_string("grid_id", "");
    basis.stop_reason = m.get_string("stop_reason", "");

    const Index n = m.require_index("n_supports");
    for (Index i = 0; i < n; ++i) {
        const std::string p = "support." + std::to_string(i) + ".";
        basis.supports.emplace_back(m.require_doubles(p + "sigma"));
        std::vector<Matrix> fields;
        for (Index j = 0; j < n_d; ++j) {
            fields.push_back(
                read_matrix(dir / m.require_string(p + "field." + std::to_string(j) + ".file")));
        }
        basis.support_fields.push_back(std::move(fields));
        if (mode == BasisLoad::Full) {
            basis.reduced.push_back(
                {read_matrix(dir / m.require_string(p + "reduced.file")),
                 basis.supports.back()});
        }
    }

    basis.gram.n_h = n_h;
    basis.gram.n_supports = n;
    basis.gram.gram = read_matrix(dir / "gram.lfrb").cast<Accum>();
    basis.gram.rhs = read_matrix(dir / "gram_rhs.lfrb").col(0).cast<Accum>();
    basis.gram.s_norm_sq = static_cast<Accum>(m.require_double("gram.s_norm_sq"));
    if (basis.gram.gram.rows() != n * n_h || basis.gram.rhs.size() != n * n_h) {
        throw IoError("gram data shape does not match the basis manifest in " + dir.string());
    }

    const Index n_axes = m.get_index("domain.axes", 0);
    for (Index d = 0; d < n_axes; ++d) {
        const std::string p = "domain." + std::to_string(d) + ".";
        GridAxis ax;
        ax.lo = m.require_double(p + "lo");
        ax.hi = m.require_double(p + "hi");
        ax.count = m.require_index(p + "count");
        ax.scale = m.require_string(p + "scale") == "log" ? AxisScale::Log : AxisScale::Linear;
        basis.domain.push_back(ax);
    }
    return basis;
}

}  // namespace lfrb
