// Command-line driver: model generation, support selection, online
// approximation, error maps, conductivity estimation, baseline comparison,
// and benchmarking, as reproducible runs.
//
// Every run writes into --out: the command artifacts, a config.snapshot
// manifest that re-executes the run bit-identically (worker count and output
// path are per-invocation and never snapshotted), run.json listing the
// artifacts, and timings.json with per-phase wall-clock times. Only
// timings.json and bench.json carry measured time; everything else is
// deterministic for a fixed snapshot.

#include "lfrb/lfrb.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lfrb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// ---------------------------------------------------------------------------
// Run bookkeeping
// ---------------------------------------------------------------------------

class RunContext {
public:
    RunContext(std::string command, fs::path out_dir)
        : command_(std::move(command)), out_(std::move(out_dir)) {
        if (out_.empty()) throw ConfigError("--out is required");
        fs::create_directories(out_);
        start_ = clock_now();
        phase_start_ = start_;
    }

    [[nodiscard]] const fs::path& out() const { return out_; }

    fs::path artifact(const std::string& name) {
        artifacts_.push_back(name);
        return out_ / name;
    }

    void end_phase(const std::string& name) {
        const double now = clock_now();
        phases_.emplace_back(name, now - phase_start_);
        phase_start_ = now;
    }

    /// Snapshot of the resolved configuration; rerunning the same command
    /// with `--config <snapshot>` reproduces the run.
    void write_snapshot(Manifest snapshot) {
        snapshot.set("command", command_);
        snapshot.save(out_ / "config.snapshot");
    }

    void finish() {
        json run;
        run["command"] = command_;
        run["artifacts"] = artifacts_;
        std::ofstream run_file(out_ / "run.json", std::ios::trunc);
        run_file << run.dump(2) << "\n";

        json timings;
        timings["total_s"] = clock_now() - start_;
        json phases = json::object();
        for (const auto& [name, seconds] : phases_) phases[name] = seconds;
        timings["phases_s"] = phases;
        std::ofstream timing_file(out_ / "timings.json", std::ios::trunc);
        timing_file << timings.dump(2) << "\n";
    }

private:
    static double clock_now() {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }

    std::string command_;
    fs::path out_;
    std::vector<std::string> artifacts_;
    std::vector<std::pair<std::string, double>> phases_;
    double start_ = 0.0;
    double phase_start_ = 0.0;
};

// ---------------------------------------------------------------------------
// Flag / config resolution: command-line flags override config values, which
// override built-in defaults.
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path,
                    "Config manifest; flags override config values");
    cmd->add_option("--out", args.out, "Output directory for this run");
    cmd->add_option("--seed", args.seed, "Random seed where the command uses one");
    cmd->add_option("--jobs", args.jobs, "Worker threads (0 = hardware)");
}

Manifest load_config(const CLI::App& cmd, const CommonArgs& args) {
    if (args.config_path.empty()) return Manifest();
    Manifest cfg = Manifest::load(args.config_path);
    if (cfg.has("command") && cfg.require_string("command") != cmd.get_name()) {
        throw ConfigError("config snapshot was recorded for command '" +
                          cfg.require_string("command") + "', not '" + cmd.get_name() + "'");
    }
    return cfg;
}

bool given(const CLI::App& cmd, const std::string& flag) { return cmd.count(flag) > 0; }

std::string resolve_string(const CLI::App& cmd, const std::string& flag, const Manifest& cfg,
                           const std::string& key, const std::string& current) {
    if (given(cmd, flag)) return current;
    return cfg.get_string(key, current);
}

double resolve_double(const CLI::App& cmd, const std::string& flag, const Manifest& cfg,
                      const std::string& key, double current) {
    if (given(cmd, flag)) return current;
    return cfg.get_double(key, current);
}

Index resolve_index(const CLI::App& cmd, const std::string& flag, const Manifest& cfg,
                    const std::string& key, Index current) {
    if (given(cmd, flag)) return current;
    return cfg.get_index(key, current);
}

std::uint64_t resolve_u64(const CLI::App& cmd, const std::string& flag, const Manifest& cfg,
                          const std::string& key, std::uint64_t current) {
    if (given(cmd, flag)) return current;
    return cfg.get_u64(key, current);
}

bool resolve_bool(const CLI::App& cmd, const std::string& flag, const Manifest& cfg,
                  const std::string& key, bool current) {
    if (given(cmd, flag)) return current;
    return cfg.get_bool(key, current);
}

std::vector<double> parse_sigma_list(const std::string& text) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        if (!part.empty()) {
            try {
                values.push_back(std::stod(part));
            } catch (const std::exception&) {
                throw ConfigError("bad conductivity value '" + part + "'");
            }
        }
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    if (values.empty()) throw ConfigError("empty conductivity list '" + text + "'");
    return values;
}

json sigma_json(const ConductivityPoint& sigma) {
    json out = json::array();
    for (double v : sigma.values()) out.push_back(v);
    return out;
}

void write_json(const fs::path& path, const json& value) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << value.dump(2) << "\n";
    if (!out) throw IoError("short write: " + path.string());
}

// Resolves the query grid for a command: an explicit axis string wins, then a
// grid.* tree in the config, then the domain recorded in a basis.
ConductivityGrid resolve_grid(const CLI::App& cmd, const Manifest& cfg,
                              const std::string& grid_flag_value,
                              const SupportBasis* basis) {
    if (!grid_flag_value.empty()) {
        return ConductivityGrid::regular(parse_axis_list(grid_flag_value));
    }
    if (cfg.has("grid.axes")) return grid_from_manifest(cfg);
    if (basis && !basis->domain.empty()) return ConductivityGrid::regular(basis->domain);
    throw ConfigError("no grid given: pass --grid or a config with grid.* keys");
}

void snapshot_grid(Manifest& snapshot, const ConductivityGrid& grid) {
    grid_to_manifest(grid, snapshot);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

Manifest default_voxel_head_manifest() {
    Manifest m;
    m.set("type", "voxel-head");
    m.set("shape", "16 16 16");
    m.set("regions.count", Index(3));
    m.set("region.1.box", "5 5 5 10 10 10");
    m.set("region.2.box", "3 3 3 12 12 12");
    m.set("electrodes.count", Index(32));
    m.set("sources.count", Index(128));
    m.set("spacing", 0.01);
    m.set("reference_sigma",
          std::vector<double>{1.25, std::pow(10.0, -2.5), 1.0});
    return m;
}

Manifest default_synthetic_manifest() {
    Manifest m;
    m.set("type", "synthetic");
    m.set("n_unknowns", Index(64));
    m.set("n_compartments", Index(2));
    m.set("n_electrodes", Index(8));
    m.set("n_sources", Index(10));
    m.set("gamma.linear", true);
    m.set("gamma.inverse", true);
    m.set("lambda.constant", true);
    m.set("lambda.linear", true);
    m.set("seed", std::uint64_t(1));
    m.set("conditioning_floor", 1e-3);
    return m;
}

std::vector<Index> manifest_indices(const Manifest& m, const std::string& key, Index expect = -1) {
    const std::vector<double> raw = m.require_doubles(key);
    if (expect >= 0 && static_cast<Index>(raw.size()) != expect) {
        throw ConfigError("field '" + key + "' needs " + std::to_string(expect) + " values");
    }
    std::vector<Index> out;
    for (double v : raw) {
        const Index i = static_cast<Index>(v);
        if (static_cast<double>(i) != v) {
            throw ConfigError("field '" + key + "' must hold integers");
        }
        out.push_back(i);
    }
    return out;
}

ParametrizedSystem system_from_spec(const Manifest& spec, bool seed_given, std::uint64_t seed) {
    const std::string type = spec.require_string("type");
    if (type == "voxel-head") {
        const std::vector<Index> shape = manifest_indices(spec, "shape", 3);
        const Index n_regions = spec.require_index("regions.count");
        if (n_regions < 1) throw ConfigError("field 'regions.count' must be >= 1");
        std::vector<CellBox> boxes;
        for (Index r = 1; r < n_regions; ++r) {
            const std::string key = "region." + std::to_string(r) + ".box";
            const std::vector<Index> b = manifest_indices(spec, key, 6);
            boxes.push_back(CellBox{{b[0], b[1], b[2]}, {b[3], b[4], b[5]}});
        }
        ConductivityPoint ref;
        if (spec.has("reference_sigma")) {
            ref = ConductivityPoint(spec.require_doubles("reference_sigma"));
        }
        VoxelHeadSpec vox = voxel_head_from_boxes(
            {shape[0], shape[1], shape[2]}, boxes, spec.require_index("electrodes.count"),
            spec.require_index("sources.count"), spec.require_double("spacing"), ref);
        if (spec.has("electrodes.cells")) {
            vox.electrode_cells = manifest_indices(spec, "electrodes.cells");
        }
        if (spec.has("sources.pairs")) {
            const std::vector<Index> flat = manifest_indices(spec, "sources.pairs");
            if (flat.size() % 2 != 0) {
                throw ConfigError("field 'sources.pairs' needs an even count of cell indices");
            }
            vox.source_pairs.clear();
            for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
                vox.source_pairs.emplace_back(flat[i], flat[i + 1]);
            }
        }
        return build_voxel_head(vox);
    }
    if (type == "synthetic") {
        SyntheticSpec s;
        s.n_unknowns = spec.require_index("n_unknowns");
        s.n_compartments = spec.require_index("n_compartments");
        s.n_electrodes = spec.require_index("n_electrodes");
        s.n_sources = spec.require_index("n_sources");
        s.gamma_linear = spec.get_bool("gamma.linear", true);
        s.gamma_inverse = spec.get_bool("gamma.inverse", false);
        s.gamma_pair_sum = spec.get_bool("gamma.pair_sum", false);
        s.gamma_constant = spec.get_bool("gamma.constant", false);
        s.lambda_constant = spec.get_bool("lambda.constant", true);
        s.lambda_linear = spec.get_bool("lambda.linear", false);
        s.seed = seed_given ? seed : spec.get_u64("seed", 1);
        s.conditioning_floor = spec.get_double("conditioning_floor", 1e-3);
        return build_synthetic_system(s);
    }
    throw ConfigError("field 'type' must be 'voxel-head' or 'synthetic', got '" + type + "'");
}

int run_gen(const CLI::App& cmd, const CommonArgs& common, const std::string& spec_path,
            const std::string& preset) {
    Manifest cfg = load_config(cmd, common);

    Manifest spec;
    if (!spec_path.empty()) {
        spec = Manifest::load(spec_path);
    } else if (cfg.has("type")) {
        spec = cfg;  // snapshot rerun: the spec is inlined in the config
    } else if (preset == "default-voxel-head" || preset.empty()) {
        spec = default_voxel_head_manifest();
    } else if (preset == "default-synthetic") {
        spec = default_synthetic_manifest();
    } else {
        throw ConfigError("unknown preset '" + preset +
                          "' (expected default-voxel-head or default-synthetic)");
    }

    RunContext run("gen", common.out);
    const bool seed_given = given(cmd, "--seed") || cfg.has("seed");
    const std::uint64_t seed =
        given(cmd, "--seed") ? common.seed : cfg.get_u64("seed", common.seed);
    ParametrizedSystem sys = system_from_spec(spec, seed_given, seed);
    run.end_phase("build");

    save_system(sys, run.out());
    run.end_phase("write");

    Manifest snapshot = spec;  // inline the full spec for bit-identical reruns
    if (seed_given && spec.require_string("type") == "synthetic") snapshot.set("seed", seed);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("gen: wrote system (%lld unknowns, %zu head components) to %s\n",
                static_cast<long long>(sys.n_unknowns), sys.h_components.size(),
                run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

int run_select(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
               std::string grid_text, std::string init_text, double eps_abs, double eps_delta,
               Index max_supports, std::vector<std::string> explicit_sigmas) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    if (system_dir.empty()) throw ConfigError("--system is required");
    init_text = resolve_string(cmd, "--init", cfg, "init", init_text);
    eps_abs = resolve_double(cmd, "--eps-abs", cfg, "eps_abs", eps_abs);
    eps_delta = resolve_double(cmd, "--eps-delta", cfg, "eps_delta", eps_delta);
    max_supports = resolve_index(cmd, "--max-supports", cfg, "max_supports", max_supports);
    if (explicit_sigmas.empty() && cfg.has("supports.count")) {
        const Index count = cfg.require_index("supports.count");
        for (Index i = 0; i < count; ++i) {
            explicit_sigmas.push_back(cfg.require_string("supports." + std::to_string(i)));
        }
    }

    RunContext run("select", common.out);
    ParametrizedSystem sys = load_system(system_dir);
    ConductivityGrid grid =
        resolve_grid(cmd, cfg, given(cmd, "--grid") ? grid_text : "", nullptr);
    run.end_phase("load");

    GreedyConfig greedy;
    if (init_text == "corners") {
        greedy.init = GreedyConfig::Init::Corners;
    } else if (init_text == "center") {
        greedy.init = GreedyConfig::Init::Center;
    } else if (init_text == "explicit") {
        greedy.init = GreedyConfig::Init::Explicit;
        for (const std::string& s : explicit_sigmas) {
            greedy.explicit_supports.emplace_back(parse_sigma_list(s));
        }
    } else {
        throw ConfigError("--init must be corners, center, or explicit, got '" + init_text + "'");
    }
    greedy.eps_abs = eps_abs;
    greedy.eps_delta = eps_delta;
    greedy.max_supports = max_supports;
    greedy.jobs = common.jobs;

    SupportBasis basis = select_supports(sys, grid, greedy);
    run.end_phase("select");

    save_basis(basis, run.out());
    run.end_phase("write");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot_grid(snapshot, grid);
    snapshot.set("init", init_text);
    snapshot.set("eps_abs", eps_abs);
    snapshot.set("eps_delta", eps_delta);
    snapshot.set("max_supports", max_supports);
    if (!explicit_sigmas.empty()) {
        snapshot.set("supports.count", static_cast<Index>(explicit_sigmas.size()));
        for (std::size_t i = 0; i < explicit_sigmas.size(); ++i) {
            snapshot.set("supports." + std::to_string(i), explicit_sigmas[i]);
        }
    }
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("select: %lld supports, stop=%s, final max bound %.3e -> %s\n",
                static_cast<long long>(basis.size()), basis.stop_reason.c_str(),
                basis.trace.back().max_rel_upper_bound, run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// approx / exact
// ---------------------------------------------------------------------------

std::vector<ConductivityPoint> resolve_queries(const CLI::App& cmd, const Manifest& cfg,
                                               const std::vector<std::string>& sigma_flags,
                                               const std::string& grid_text,
                                               const SupportBasis* basis) {
    std::vector<ConductivityPoint> queries;
    std::vector<std::string> sigma_texts = sigma_flags;
    if (sigma_texts.empty() && cfg.has("sigmas.count")) {
        const Index count = cfg.require_index("sigmas.count");
        for (Index i = 0; i < count; ++i) {
            sigma_texts.push_back(cfg.require_string("sigmas." + std::to_string(i)));
        }
    }
    for (const std::string& s : sigma_texts) queries.emplace_back(parse_sigma_list(s));
    if (!grid_text.empty() || cfg.has("grid.axes")) {
        const ConductivityGrid grid = resolve_grid(cmd, cfg, grid_text, basis);
        for (Index i = 0; i < grid.size(); ++i) queries.push_back(grid[i]);
    }
    if (queries.empty()) throw ConfigError("no query points: pass --sigma or --grid");
    return queries;
}

void snapshot_queries(Manifest& snapshot, const std::vector<std::string>& sigma_flags) {
    if (sigma_flags.empty()) return;
    snapshot.set("sigmas.count", static_cast<Index>(sigma_flags.size()));
    for (std::size_t i = 0; i < sigma_flags.size(); ++i) {
        snapshot.set("sigmas." + std::to_string(i), sigma_flags[i]);
    }
}

int run_approx(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
               std::string basis_dir, std::vector<std::string> sigma_flags,
               std::string grid_text, Index n_limit, bool exact_time, int reps) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    basis_dir = resolve_string(cmd, "--basis", cfg, "basis", basis_dir);
    n_limit = resolve_index(cmd, "--n-limit", cfg, "n_limit", n_limit);
    exact_time = resolve_bool(cmd, "--exact-time", cfg, "exact_time", exact_time);
    reps = static_cast<int>(resolve_index(cmd, "--reps", cfg, "reps", reps));
    if (basis_dir.empty()) throw ConfigError("--basis is required");

    RunContext run("approx", common.out);
    const SupportBasis basis = load_basis(basis_dir, BasisLoad::Online);
    const std::vector<ConductivityPoint> queries = resolve_queries(
        cmd, cfg, sigma_flags, given(cmd, "--grid") ? grid_text : "", &basis);
    if (!system_dir.empty()) {
        // Only the dimension/multiplier header is needed; never the matrices.
        const SystemInfo info = load_system_info(system_dir);
        if (info.n_h() != basis.info.n_h() || info.n_d() != basis.info.n_d() ||
            info.n_compartments != basis.info.n_compartments) {
            throw ConfigError("basis does not match the system at " + system_dir);
        }
    }
    run.end_phase("load");

    json meta = json::array();
    std::vector<double> online_times;
    for (std::size_t k = 0; k < queries.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const Approximation approx = approximate(basis, queries[k], n_limit);
        const auto t1 = std::chrono::steady_clock::now();
        online_times.push_back(std::chrono::duration<double>(t1 - t0).count());
        write_matrix(run.artifact("approx_" + std::to_string(k) + ".lfrb"), approx.leadfield);
        json entry;
        entry["sigma"] = sigma_json(queries[k]);
        entry["rel_upper_bound"] = approx.solution.relative_upper_bound;
        entry["out_of_domain"] = approx.out_of_domain;
        entry["regularized"] = approx.solution.regularized;
        entry["n_supports_used"] =
            n_limit < 0 ? basis.size() : std::min<Index>(n_limit, basis.size());
        meta.push_back(entry);
    }
    write_json(run.artifact("approx.json"), meta);
    run.end_phase("approximate");

    json timing;
    {
        double total = 0.0;
        for (double t : online_times) total += t;
        timing["online_mean_s"] = total / static_cast<double>(online_times.size());
        timing["online_median_s"] = median(online_times);
    }
    if (exact_time) {
        if (system_dir.empty()) throw ConfigError("--exact-time needs --system");
        const ParametrizedSystem sys = load_system(system_dir);
        std::vector<ConductivityPoint> probe(queries.begin(),
                                             queries.begin() +
                                                 std::min<std::size_t>(queries.size(), 3));
        timing["exact_median_s"] = measure_exact_per_sigma(sys, probe, reps);
        timing["speedup"] = timing["exact_median_s"].get<double>() /
                            std::max(timing["online_median_s"].get<double>(), 1e-12);
    }
    write_json(run.out() / "online_timing.json", timing);
    run.end_phase("timing");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot.set("basis", basis_dir);
    snapshot_queries(snapshot, sigma_flags);
    if (given(cmd, "--grid")) {
        snapshot_grid(snapshot, ConductivityGrid::regular(parse_axis_list(grid_text)));
    } else if (cfg.has("grid.axes")) {
        snapshot_grid(snapshot, grid_from_manifest(cfg));
    }
    snapshot.set("n_limit", n_limit);
    snapshot.set("exact_time", exact_time);
    snapshot.set("reps", static_cast<Index>(reps));
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("approx: %zu lead fields -> %s\n", queries.size(), run.out().string().c_str());
    return kExitOk;
}

int run_exact(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
              std::vector<std::string> sigma_flags, std::string grid_text) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    if (system_dir.empty()) throw ConfigError("--system is required");

    RunContext run("exact", common.out);
    const ParametrizedSystem sys = load_system(system_dir);
    const std::vector<ConductivityPoint> queries =
        resolve_queries(cmd, cfg, sigma_flags, given(cmd, "--grid") ? grid_text : "", nullptr);
    run.end_phase("load");

    json meta = json::array();
    std::vector<Matrix> fields(queries.size());
    parallel_for(static_cast<Index>(queries.size()), common.jobs, [&](Index k) {
        fields[static_cast<std::size_t>(k)] =
            exact_lead_field(sys, queries[static_cast<std::size_t>(k)]);
    });
    for (std::size_t k = 0; k < queries.size(); ++k) {
        write_matrix(run.artifact("exact_" + std::to_string(k) + ".lfrb"), fields[k]);
        json entry;
        entry["sigma"] = sigma_json(queries[k]);
        meta.push_back(entry);
    }
    write_json(run.artifact("exact.json"), meta);
    run.end_phase("solve");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot_queries(snapshot, sigma_flags);
    if (given(cmd, "--grid")) {
        snapshot_grid(snapshot, ConductivityGrid::regular(parse_axis_list(grid_text)));
    } else if (cfg.has("grid.axes")) {
        snapshot_grid(snapshot, grid_from_manifest(cfg));
    }
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("exact: %zu lead fields -> %s\n", queries.size(), run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// errmap
// ---------------------------------------------------------------------------

int run_errmap(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
               std::string basis_dir, std::string grid_text, bool with_exact, Index n_limit) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    basis_dir = resolve_string(cmd, "--basis", cfg, "basis", basis_dir);
    with_exact = resolve_bool(cmd, "--with-exact", cfg, "with_exact", with_exact);
    n_limit = resolve_index(cmd, "--n-limit", cfg, "n_limit", n_limit);
    if (system_dir.empty()) throw ConfigError("--system is required");
    if (basis_dir.empty()) throw ConfigError("--basis is required");

    RunContext run("errmap", common.out);
    SupportBasis basis = load_basis(basis_dir, BasisLoad::Online);
    if (n_limit >= 0 && n_limit < basis.size()) {
        // Truncate to a prefix of the selection.
        basis.supports.resize(static_cast<std::size_t>(n_limit));
        basis.support_fields.resize(static_cast<std::size_t>(n_limit));
        const Index size = n_limit * basis.gram.n_h;
        basis.gram.gram = AccumMatrix(basis.gram.gram.topLeftCorner(size, size));
        basis.gram.rhs = AccumVector(basis.gram.rhs.head(size));
        basis.gram.n_supports = n_limit;
    }
    const ParametrizedSystem sys = load_system(system_dir);
    const ConductivityGrid grid =
        resolve_grid(cmd, cfg, given(cmd, "--grid") ? grid_text : "", &basis);
    run.end_phase("load");

    const ErrorSweep sweep = error_sweep(basis, sys, grid, with_exact, common.jobs);
    run.end_phase("sweep");

    {
        std::ofstream csv(run.artifact("errmap.csv"));
        const Index n_c = basis.info.n_compartments;
        for (Index d = 0; d < n_c; ++d) csv << "sigma_" << d << ",";
        csv << "rel_upper_bound";
        if (with_exact) csv << ",true_rel_error";
        csv << ",valid\n";
        for (Index s = 0; s < grid.size(); ++s) {
            for (Index d = 0; d < n_c; ++d) csv << format_double(grid[s][d]) << ",";
            csv << format_double(sweep.rel_upper_bound[static_cast<std::size_t>(s)]);
            if (with_exact) {
                csv << "," << format_double(sweep.true_rel_error[static_cast<std::size_t>(s)]);
            }
            csv << "," << static_cast<int>(sweep.valid[static_cast<std::size_t>(s)]) << "\n";
        }
    }
    json summary;
    summary["max_rel_upper_bound"] = sweep.max_rel_upper_bound;
    summary["argmax_sigma"] = sigma_json(grid[sweep.argmax_index]);
    if (with_exact) {
        double max_true = 0.0;
        for (Index s = 0; s < grid.size(); ++s) {
            if (sweep.valid[static_cast<std::size_t>(s)]) {
                max_true = std::max(max_true, sweep.true_rel_error[static_cast<std::size_t>(s)]);
            }
        }
        summary["max_true_rel_error"] = max_true;
    }
    summary["n_supports"] = basis.size();
    write_json(run.artifact("errmap.json"), summary);
    run.end_phase("write");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot.set("basis", basis_dir);
    snapshot_grid(snapshot, grid);
    snapshot.set("with_exact", with_exact);
    snapshot.set("n_limit", n_limit);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("errmap: max bound %.3e over %lld samples -> %s\n", sweep.max_rel_upper_bound,
                static_cast<long long>(grid.size()), run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int run_estimate(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
                 std::string basis_dir, std::string grid_text, std::string data_path,
                 std::string mode_text, std::string normalize_text, Index n_limit) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    basis_dir = resolve_string(cmd, "--basis", cfg, "basis", basis_dir);
    data_path = resolve_string(cmd, "--data", cfg, "data", data_path);
    mode_text = resolve_string(cmd, "--mode", cfg, "mode", mode_text);
    normalize_text = resolve_string(cmd, "--normalize", cfg, "normalize", normalize_text);
    n_limit = resolve_index(cmd, "--n-limit", cfg, "n_limit", n_limit);
    if (system_dir.empty()) throw ConfigError("--system is required");
    if (data_path.empty()) throw ConfigError("--data is required");

    LeadfieldMode mode;
    if (mode_text == "exact") {
        mode = LeadfieldMode::Exact;
    } else if (mode_text == "approx") {
        mode = LeadfieldMode::Approximate;
        if (basis_dir.empty()) throw ConfigError("--mode approx needs --basis");
    } else {
        throw ConfigError("--mode must be exact or approx, got '" + mode_text + "'");
    }
    MapNormalization normalization;
    if (normalize_text == "min") {
        normalization = MapNormalization::MinNormalized;
    } else if (normalize_text == "raw") {
        normalization = MapNormalization::Raw;
    } else {
        throw ConfigError("--normalize must be raw or min, got '" + normalize_text + "'");
    }

    RunContext run("estimate", common.out);
    const ParametrizedSystem sys = load_system(system_dir);
    SupportBasis basis;
    if (!basis_dir.empty()) basis = load_basis(basis_dir, BasisLoad::Online);
    const ConductivityGrid grid =
        resolve_grid(cmd, cfg, given(cmd, "--grid") ? grid_text : "",
                     basis_dir.empty() ? nullptr : &basis);
    const Matrix data = read_matrix(data_path);
    if (data.rows() != sys.n_electrodes) {
        throw ConfigError("topography rows " + std::to_string(data.rows()) +
                          " do not match electrode count " + std::to_string(sys.n_electrodes));
    }
    run.end_phase("load");

    const DataFitMap map =
        error_map(sys, grid, data, mode, basis_dir.empty() ? nullptr : &basis, n_limit,
                  normalization, common.jobs);
    const ConductivityEstimate estimate = estimate_conductivity(map);
    run.end_phase("map");

    {
        std::ofstream csv(run.artifact("fitmap.csv"));
        const Index n_c = static_cast<Index>(grid.n_axes());
        for (Index d = 0; d < n_c; ++d) csv << "sigma_" << d << ",";
        csv << "value,valid,best_source\n";
        for (Index s = 0; s < grid.size(); ++s) {
            for (Index d = 0; d < n_c; ++d) csv << format_double(grid[s][d]) << ",";
            csv << format_double(map.values[static_cast<std::size_t>(s)]) << ","
                << static_cast<int>(map.valid[static_cast<std::size_t>(s)]) << ","
                << map.best_source[static_cast<std::size_t>(s)] << "\n";
        }
    }
    json summary;
    summary["argmin"] = {{"index", estimate.argmin_index},
                         {"sigma", sigma_json(estimate.sigma_hat)},
                         {"value", estimate.min_value}};
    summary["flat"] = estimate.flat;
    summary["normalization"] = normalize_text;
    summary["mode"] = mode_text;
    json profile = json::array();
    for (const ProfileEntry& p : estimate.profile) {
        profile.push_back({{"axis_value", p.axis_value},
                           {"sample_index", p.sample_index},
                           {"sigma", sigma_json(p.sigma)},
                           {"value", p.value}});
    }
    summary["profile"] = profile;
    write_json(run.artifact("estimate.json"), summary);
    run.end_phase("write");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot.set("basis", basis_dir);
    snapshot.set("data", data_path);
    snapshot.set("mode", mode_text);
    snapshot.set("normalize", normalize_text);
    snapshot.set("n_limit", n_limit);
    snapshot_grid(snapshot, grid);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("estimate: argmin at %s (value %.6g) -> %s\n",
                estimate.sigma_hat.to_string().c_str(), estimate.min_value,
                run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int run_simulate(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
                 std::string sigma_text, Index source_index, double amplitude,
                 std::string amplitudes_text, double noise_std) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    sigma_text = resolve_string(cmd, "--sigma", cfg, "sigma", sigma_text);
    source_index = resolve_index(cmd, "--source", cfg, "source", source_index);
    amplitude = resolve_double(cmd, "--amplitude", cfg, "amplitude", amplitude);
    amplitudes_text = resolve_string(cmd, "--amplitudes", cfg, "amplitudes", amplitudes_text);
    noise_std = resolve_double(cmd, "--noise", cfg, "noise", noise_std);
    const std::uint64_t seed = resolve_u64(cmd, "--seed", cfg, "seed", common.seed);
    if (system_dir.empty()) throw ConfigError("--system is required");
    if (sigma_text.empty()) throw ConfigError("--sigma is required");

    RunContext run("simulate", common.out);
    const ParametrizedSystem sys = load_system(system_dir);
    const ConductivityPoint sigma(parse_sigma_list(sigma_text));
    std::vector<double> amplitudes;
    if (!amplitudes_text.empty()) {
        amplitudes = parse_sigma_list(amplitudes_text);
    } else {
        amplitudes = {amplitude};
    }
    run.end_phase("load");

    Matrix samples(sys.n_electrodes, static_cast<Index>(amplitudes.size()));
    for (std::size_t t = 0; t < amplitudes.size(); ++t) {
        samples.col(static_cast<Index>(t)) = simulate_topography(
            sys, sigma, source_index, amplitudes[t], noise_std,
            seed + static_cast<std::uint64_t>(t));
    }
    write_matrix(run.artifact("topography.lfrb"), samples);
    json meta;
    meta["sigma"] = sigma_json(sigma);
    meta["source"] = source_index;
    meta["amplitudes"] = amplitudes;
    meta["noise_std"] = noise_std;
    meta["seed"] = seed;
    write_json(run.artifact("simulate.json"), meta);
    run.end_phase("simulate");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot.set("sigma", sigma_text);
    snapshot.set("source", source_index);
    snapshot.set("amplitude", amplitude);
    if (!amplitudes_text.empty()) snapshot.set("amplitudes", amplitudes_text);
    snapshot.set("noise", noise_std);
    snapshot.set("seed", seed);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("simulate: %zu sample(s) at %s -> %s\n", amplitudes.size(),
                sigma.to_string().c_str(), run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare-poly
// ---------------------------------------------------------------------------

int run_compare_poly(const CLI::App& cmd, const CommonArgs& common, std::string system_dir,
                     Index axis, double lo, double hi, std::string base_text,
                     std::string n_values_text, Index eval_count, Index grid_size,
                     bool log_variant) {
    Manifest cfg = load_config(cmd, common);
    system_dir = resolve_string(cmd, "--system", cfg, "system", system_dir);
    axis = resolve_index(cmd, "--axis", cfg, "axis", axis);
    lo = resolve_double(cmd, "--lo", cfg, "lo", lo);
    hi = resolve_double(cmd, "--hi", cfg, "hi", hi);
    base_text = resolve_string(cmd, "--base", cfg, "base", base_text);
    n_values_text = resolve_string(cmd, "--n-values", cfg, "n_values", n_values_text);
    eval_count = resolve_index(cmd, "--eval-count", cfg, "eval_count", eval_count);
    grid_size = resolve_index(cmd, "--grid-size", cfg, "grid_size", grid_size);
    log_variant = resolve_bool(cmd, "--log-variant", cfg, "log_variant", log_variant);
    if (system_dir.empty()) throw ConfigError("--system is required");

    RunContext run("compare-poly", common.out);
    const ParametrizedSystem sys = load_system(system_dir);
    ConductivityPoint base;
    if (!base_text.empty()) {
        base = ConductivityPoint(parse_sigma_list(base_text));
    } else {
        std::vector<double> ones(static_cast<std::size_t>(sys.n_compartments), 1.0);
        base = ConductivityPoint(std::move(ones));
    }
    std::vector<Index> n_values;
    for (double v : parse_sigma_list(n_values_text)) n_values.push_back(static_cast<Index>(v));
    run.end_phase("load");

    const std::vector<ComparisonRow> rows = compare_methods(
        sys, axis, lo, hi, base, n_values, eval_count, common.jobs, log_variant, grid_size);
    run.end_phase("compare");

    {
        std::ofstream csv(run.artifact("comparison.csv"));
        csv << "method,n,mean_rel_error,max_rel_error\n";
        for (const ComparisonRow& r : rows) {
            csv << r.method << "," << r.n << "," << format_double(r.mean_rel_error) << ","
                << format_double(r.max_rel_error) << "\n";
        }
    }
    json summary = json::array();
    for (const ComparisonRow& r : rows) {
        summary.push_back({{"method", r.method},
                           {"n", r.n},
                           {"mean_rel_error", r.mean_rel_error},
                           {"max_rel_error", r.max_rel_error}});
    }
    write_json(run.artifact("comparison.json"), summary);
    run.end_phase("write");

    Manifest snapshot;
    snapshot.set("system", system_dir);
    snapshot.set("axis", axis);
    snapshot.set("lo", lo);
    snapshot.set("hi", hi);
    snapshot.set("base", base_text.empty() ? join_doubles(base.values(), ",") : base_text);
    snapshot.set("n_values", n_values_text);
    snapshot.set("eval_count", eval_count);
    snapshot.set("grid_size", grid_size);
    snapshot.set("log_variant", log_variant);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    std::printf("compare-poly: %zu rows -> %s\n", rows.size(), run.out().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int run_bench(const CLI::App& cmd, const CommonArgs& common,
              std::vector<std::string> system_dirs, std::string sizes_text, Index supports,
              Index reps, Index query_count) {
    Manifest cfg = load_config(cmd, common);
    sizes_text = resolve_string(cmd, "--sizes", cfg, "sizes", sizes_text);
    supports = resolve_index(cmd, "--supports", cfg, "supports", supports);
    reps = resolve_index(cmd, "--reps", cfg, "reps", reps);
    query_count = resolve_index(cmd, "--queries", cfg, "queries", query_count);

    RunContext run("bench", common.out);

    struct Case {
        std::string name;
        ParametrizedSystem sys;
    };
    std::vector<Case> cases;
    if (!system_dirs.empty()) {
        for (const std::string& dir : system_dirs) {
            cases.push_back({dir, load_system(dir)});
        }
    } else {
        for (double v : parse_sigma_list(sizes_text)) {
            const Index side = static_cast<Index>(v);
            // Scale the default nested boxes to the requested grid side.
            const Index b_lo = side / 3, b_hi = 2 * side / 3 - 1;
            const Index s_lo = std::max<Index>(1, side / 5), s_hi = side - 1 - s_lo;
            VoxelHeadSpec spec = voxel_head_from_boxes(
                {side, side, side},
                {CellBox{{b_lo, b_lo, b_lo}, {b_hi, b_hi, b_hi}},
                 CellBox{{s_lo, s_lo, s_lo}, {s_hi, s_hi, s_hi}}},
                32, 64, 0.01, ConductivityPoint({1.25, std::pow(10.0, -2.5), 1.0}));
            cases.push_back({"voxel-" + std::to_string(side), build_voxel_head(spec)});
        }
    }
    run.end_phase("load");

    // Fixed-size basis per case so online cost is comparable across sizes.
    std::vector<GridAxis> axes = default_conductivity_domain();
    axes[0].count = 5;
    axes[1].count = 5;
    const ConductivityGrid selection_grid = ConductivityGrid::regular(axes);
    std::vector<ConductivityPoint> queries;
    for (Index k = 0; k < query_count; ++k) {
        const Index step = std::max<Index>(Index(1), selection_grid.size() / query_count);
        queries.push_back(selection_grid[(k * step + 7) % selection_grid.size()]);
    }

    json results = json::array();
    std::vector<double> online_times;
    for (Case& c : cases) {
        GreedyConfig greedy;
        greedy.init = GreedyConfig::Init::Corners;
        greedy.eps_abs = 0.0;
        greedy.eps_delta = 0.0;
        greedy.max_supports = supports;
        greedy.jobs = common.jobs;
        const SupportBasis basis = select_supports(c.sys, selection_grid, greedy);

        const double exact_s = measure_exact_per_sigma(c.sys, queries, static_cast<int>(reps));
        const double online_s = measure_online_per_sigma(basis, queries, static_cast<int>(reps));
        online_times.push_back(online_s);
        json entry;
        entry["case"] = c.name;
        entry["n_unknowns"] = c.sys.n_unknowns;
        entry["n_supports"] = basis.size();
        entry["exact_median_s"] = exact_s;
        entry["online_median_s"] = online_s;
        entry["speedup"] = exact_s / std::max(online_s, 1e-12);
        results.push_back(entry);
        std::printf("bench %s: exact %.4fs online %.6fs speedup %.1fx\n", c.name.c_str(), exact_s,
                    online_s, exact_s / std::max(online_s, 1e-12));
    }
    json summary;
    summary["cases"] = results;
    if (online_times.size() >= 2) {
        const auto [lo_it, hi_it] = std::minmax_element(online_times.begin(), online_times.end());
        summary["online_max_over_min"] = *hi_it / std::max(*lo_it, 1e-12);
    }
    write_json(run.artifact("bench.json"), summary);
    run.end_phase("bench");

    Manifest snapshot;
    if (!system_dirs.empty()) {
        snapshot.set("systems.count", static_cast<Index>(system_dirs.size()));
        for (std::size_t i = 0; i < system_dirs.size(); ++i) {
            snapshot.set("systems." + std::to_string(i), system_dirs[i]);
        }
    } else {
        snapshot.set("sizes", sizes_text);
    }
    snapshot.set("supports", supports);
    snapshot.set("reps", reps);
    snapshot.set("queries", query_count);
    run.write_snapshot(std::move(snapshot));
    run.finish();
    return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"Reduced-basis lead-field approximation toolkit"};
    app.require_subcommand(1);

    CommonArgs common;

    // gen
    std::string gen_spec, gen_preset;
    CLI::App* gen = app.add_subcommand("gen", "Generate a parametrized system directory");
    add_common(gen, common);
    gen->add_option("--spec", gen_spec, "Model spec manifest");
    gen->add_option("--preset", gen_preset, "default-voxel-head or default-synthetic");

    // select
    std::string sel_system, sel_grid, sel_init = "corners";
    double sel_eps_abs = 1e-6, sel_eps_delta = 0.0;
    Index sel_max_supports = 30;
    std::vector<std::string> sel_supports;
    CLI::App* select = app.add_subcommand("select", "Greedy support-point selection");
    add_common(select, common);
    select->add_option("--system", sel_system, "System directory");
    select->add_option("--grid", sel_grid, "Axis list lo:hi:count:scale,...");
    select->add_option("--init", sel_init, "corners, center, or explicit");
    select->add_option("--support", sel_supports, "Initial support sigma (repeatable)");
    select->add_option("--eps-abs", sel_eps_abs, "Stop when max relative bound is below");
    select->add_option("--eps-delta", sel_eps_delta, "Stop when the bound decrease is below");
    select->add_option("--max-supports", sel_max_supports, "Support cap");

    // approx
    std::string ap_system, ap_basis, ap_grid;
    std::vector<std::string> ap_sigmas;
    Index ap_n_limit = -1;
    bool ap_exact_time = false;
    int ap_reps = 5;
    CLI::App* approx = app.add_subcommand("approx", "Online lead-field approximation");
    add_common(approx, common);
    approx->add_option("--system", ap_system, "System directory (manifest only)");
    approx->add_option("--basis", ap_basis, "Basis directory");
    approx->add_option("--sigma", ap_sigmas, "Query conductivity a,b,... (repeatable)");
    approx->add_option("--grid", ap_grid, "Query grid axis list");
    approx->add_option("--n-limit", ap_n_limit, "Use only the first n supports");
    approx->add_flag("--exact-time", ap_exact_time, "Also time the exact path for the speedup");
    approx->add_option("--reps", ap_reps, "Timing repetitions");

    // exact
    std::string ex_system, ex_grid;
    std::vector<std::string> ex_sigmas;
    CLI::App* exact = app.add_subcommand("exact", "Exact lead fields by factor-and-solve");
    add_common(exact, common);
    exact->add_option("--system", ex_system, "System directory");
    exact->add_option("--sigma", ex_sigmas, "Query conductivity (repeatable)");
    exact->add_option("--grid", ex_grid, "Query grid axis list");

    // errmap
    std::string em_system, em_basis, em_grid;
    bool em_with_exact = false;
    Index em_n_limit = -1;
    CLI::App* errmap = app.add_subcommand("errmap", "Upper-bound (and true) error sweep");
    add_common(errmap, common);
    errmap->add_option("--system", em_system, "System directory");
    errmap->add_option("--basis", em_basis, "Basis directory");
    errmap->add_option("--grid", em_grid, "Sweep grid axis list (default: basis domain)");
    errmap->add_flag("--with-exact", em_with_exact, "Also compute true errors (dense solves)");
    errmap->add_option("--n-limit", em_n_limit, "Use only the first n supports");

    // estimate
    std::string es_system, es_basis, es_grid, es_data, es_mode = "exact", es_norm = "min";
    Index es_n_limit = -1;
    CLI::App* estimate = app.add_subcommand("estimate", "Conductivity estimation by dipole fit");
    add_common(estimate, common);
    estimate->add_option("--system", es_system, "System directory");
    estimate->add_option("--basis", es_basis, "Basis directory (approx mode)");
    estimate->add_option("--grid", es_grid, "Map grid axis list (default: basis domain)");
    estimate->add_option("--data", es_data, "Topography container (electrodes x samples)");
    estimate->add_option("--mode", es_mode, "exact or approx");
    estimate->add_option("--normalize", es_norm, "raw or min");
    estimate->add_option("--n-limit", es_n_limit, "Use only the first n supports");

    // simulate
    std::string sim_system, sim_sigma, sim_amplitudes;
    Index sim_source = 0;
    double sim_amplitude = 1.0, sim_noise = 0.0;
    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a measured topography");
    add_common(simulate, common);
    simulate->add_option("--system", sim_system, "System directory");
    simulate->add_option("--sigma", sim_sigma, "Ground-truth conductivity a,b,...");
    simulate->add_option("--source", sim_source, "Source index");
    simulate->add_option("--amplitude", sim_amplitude, "Source amplitude");
    simulate->add_option("--amplitudes", sim_amplitudes,
                         "Per-sample amplitudes a1,a2,... (multi-sample data)");
    simulate->add_option("--noise", sim_noise, "Gaussian noise standard deviation");

    // compare-poly
    std::string cp_system, cp_base, cp_n_values = "2,4,6,8,10,12,14";
    Index cp_axis = 1, cp_eval = 40, cp_grid_size = 25;
    double cp_lo = 1e-4, cp_hi = 1e-1;
    bool cp_log_variant = false;
    CLI::App* compare = app.add_subcommand(
        "compare-poly", "Reduced basis vs polynomial interpolation on a 1-D sweep");
    add_common(compare, common);
    compare->add_option("--system", cp_system, "System directory");
    compare->add_option("--axis", cp_axis, "Varying compartment index");
    compare->add_option("--lo", cp_lo, "Sweep lower bound");
    compare->add_option("--hi", cp_hi, "Sweep upper bound");
    compare->add_option("--base", cp_base, "Fixed compartment values a,b,... (default all 1)");
    compare->add_option("--n-values", cp_n_values, "Comma list of basis sizes");
    compare->add_option("--eval-count", cp_eval, "Evaluation points");
    compare->add_option("--grid-size", cp_grid_size, "Selection grid samples");
    compare->add_flag("--log-variant", cp_log_variant, "Add log-spaced polynomial nodes rows");

    // bench
    std::vector<std::string> bn_systems;
    std::string bn_sizes = "12,16";
    Index bn_supports = 8, bn_reps = 5, bn_queries = 5;
    CLI::App* bench = app.add_subcommand("bench", "Exact vs online timing");
    add_common(bench, common);
    bench->add_option("--system", bn_systems, "System directory (repeatable)");
    bench->add_option("--sizes", bn_sizes, "Voxel-head grid sides to generate, e.g. 12,16");
    bench->add_option("--supports", bn_supports, "Supports per benchmark basis");
    bench->add_option("--reps", bn_reps, "Timing repetitions");
    bench->add_option("--queries", bn_queries, "Query points per measurement");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen(*gen, common, gen_spec, gen_preset);
        if (select->parsed()) {
            return run_select(*select, common, sel_system, sel_grid, sel_init, sel_eps_abs,
                              sel_eps_delta, sel_max_supports, sel_supports);
        }
        if (approx->parsed()) {
            return run_approx(*approx, common, ap_system, ap_basis, ap_sigmas, ap_grid,
                              ap_n_limit, ap_exact_time, ap_reps);
        }
        if (exact->parsed()) return run_exact(*exact, common, ex_system, ex_sigmas, ex_grid);
        if (errmap->parsed()) {
            return run_errmap(*errmap, common, em_system, em_basis, em_grid, em_with_exact,
                              em_n_limit);
        }
        if (estimate->parsed()) {
            return run_estimate(*estimate, common, es_system, es_basis, es_grid, es_data,
                                es_mode, es_norm, es_n_limit);
        }
        if (simulate->parsed()) {
            return run_simulate(*simulate, common, sim_system, sim_sigma, sim_source,
                                sim_amplitude, sim_amplitudes, sim_noise);
        }
        if (compare->parsed()) {
            return run_compare_poly(*compare, common, cp_system, cp_axis, cp_lo, cp_hi, cp_base,
                                    cp_n_values, cp_eval, cp_grid_size, cp_log_variant);
        }
        if (bench->parsed()) {
            return run_bench(*bench, common, bn_systems, bn_sizes, bn_supports, bn_reps,
                             bn_queries);
        }
        std::fprintf(stderr, "no subcommand given\n");
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
