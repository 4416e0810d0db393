#pragma once

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"

#include <cstdio>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace lfrb {

// ---------------------------------------------------------------------------
// Matrix container
//
// 16-byte header: ASCII magic "LFRB", uint32 rows, uint32 cols, uint32
// reserved (zero); then rows*cols IEEE-754 binary64 values, row-major,
// little-endian. All repo matrices and vectors use this container.
// ---------------------------------------------------------------------------

namespace detail {
inline void require_little_endian() {
    static_assert(sizeof(double) == 8, "binary64 doubles required");
    const std::uint32_t probe = 1;
    if (*reinterpret_cast<const unsigned char*>(&probe) != 1) {
        throw IoError("matrix container requires a little-endian host");
    }
}
}  // namespace detail

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    detail::require_little_endian();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const char magic[4] = {'L', 'F', 'R', 'B'};
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    const std::uint32_t reserved = 0;
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    // Eigen stores column-major; the container is row-major.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(sizeof(double)) * rm.size());
    if (!out) throw IoError("short write: " + path.string());
}

inline Matrix read_matrix(const std::filesystem::path& path) {
    detail::require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    char magic[4];
    std::uint32_t rows = 0, cols = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in || std::memcmp(magic, "LFRB", 4) != 0) {
        throw IoError("bad container magic in " + path.string());
    }
    if (reserved != 0) throw IoError("bad container header in " + path.string());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double)) * rm.size());
    if (!in) throw IoError("truncated container payload in " + path.string());
    char extra;
    if (in.read(&extra, 1)) throw IoError("trailing bytes in " + path.string());
    return Matrix(rm);
}

inline void write_vector(const std::filesystem::path& path, const Vector& v) {
    write_matrix(path, Matrix(v));
}

inline Vector read_vector(const std::filesystem::path& path) {
    Matrix m = read_matrix(path);
    if (m.cols() != 1) throw IoError("expected a column vector in " + path.string());
    return Vector(m.col(0));
}

// ---------------------------------------------------------------------------
// Manifest: the structured-text key/value tree used for system and basis
// manifests, spec files, and CLI config snapshots.
//
// Syntax: one `key = value` per line, dotted keys for nesting, `#` comments,
// blank lines ignored. Serialization sorts keys, so output is deterministic.
// ---------------------------------------------------------------------------

class Manifest {
public:
    Manifest() = default;

    static Manifest parse(const std::string& text, const std::string& origin = "<string>") {
        Manifest m;
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            }
            m.entries_[key] = value;
        }
        return m;
    }

    static Manifest load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open manifest: " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text, path.string());
    }

    [[nodiscard]] std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : entries_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write manifest: " + path.string());
        out << serialize();
        if (!out) throw IoError("short manifest write: " + path.string());
    }

    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, const char* value) { entries_[key] = value; }
    void set(const std::string& key, double value) { entries_[key] = format_double(value); }
    void set(const std::string& key, Index value) { entries_[key] = std::to_string(value); }
    void set(const std::string& key, int value) { entries_[key] = std::to_string(value); }
    void set(const std::string& key, std::uint64_t value) { entries_[key] = std::to_string(value); }
    void set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }
    void set(const std::string& key, const std::vector<double>& values) {
        entries_[key] = join_doubles(values);
    }

    [[nodiscard]] std::string require_string(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("missing required field '" + key + "'");
        return it->second;
    }

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second;
    }

    [[nodiscard]] double require_double(const std::string& key) const {
        return parse_double(key, require_string(key));
    }
    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        return has(key) ? require_double(key) : fallback;
    }

    [[nodiscard]] Index require_index(const std::string& key) const {
        const std::string v = require_string(key);
        try {
            std::size_t used = 0;
            const long long parsed = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return static_cast<Index>(parsed);
        } catch (const std::exception&) {
            throw ConfigError("field '" + key + "' is not an integer: '" + v + "'");
        }
    }
    [[nodiscard]] Index get_index(const std::string& key, Index fallback) const {
        return has(key) ? require_index(key) : fallback;
    }

    [[nodiscard]] std::uint64_t require_u64(const std::string& key) const {
        const std::string v = require_string(key);
        try {
            std::size_t used = 0;
            const unsigned long long parsed = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return parsed;
        } catch (const std::exception&) {
            throw ConfigError("field '" + key + "' is not an unsigned integer: '" + v + "'");
        }
    }
    [[nodiscard]] std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? require_u64(key) : fallback;
    }

    [[nodiscard]] bool require_bool(const std::string& key) const {
        const std::string v = require_string(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("field '" + key + "' is not a boolean: '" + v + "'");
    }
    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? require_bool(key) : fallback;
    }

    [[nodiscard]] std::vector<double> require_doubles(const std::string& key) const {
        const std::string v = require_string(key);
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos < v.size()) {
            while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
            if (pos >= v.size()) break;
            std::size_t end = pos;
            while (end < v.size() && !std::isspace(static_cast<unsigned char>(v[end]))) ++end;
            out.push_back(parse_double(key, v.substr(pos, end - pos)));
            pos = end;
        }
        if (out.empty()) throw ConfigError("field '" + key + "' has no values");
        return out;
    }

    [[nodiscard]] std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_) {
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        }
        return out;
    }

    [[nodiscard]] const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const double parsed = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return parsed;
        } catch (const std::exception&) {
            throw ConfigError("field '" + key + "' is not a number: '" + v + "'");
        }
    }

    std::map<std::string, std::string> entries_;
};

// ---------------------------------------------------------------------------
// Multiplier spec <-> text
//
// Term grammar: "<coeff>" for constants, "<coeff>*s<k>" for coeff*sigma_k,
// "<coeff>*s<k>^-1" for coeff/sigma_k; terms joined with " + ".
// ---------------------------------------------------------------------------

inline std::string multiplier_to_string(const MultiplierSpec& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.terms.size(); ++i) {
        const auto& t = spec.terms[i];
        if (i) out += " + ";
        if (t.compartment < 0 || t.power == 0) {
            out += format_double(t.coefficient);
        } else {
            out += format_double(t.coefficient) + "*s" + std::to_string(t.compartment);
            if (t.power < 0) out += "^-1";
        }
    }
    if (out.empty()) out = "0";
    return out;
}

inline MultiplierSpec multiplier_from_string(const std::string& text) {
    MultiplierSpec spec;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t sep = text.find(" + ", pos);
        if (sep == std::string::npos) sep = text.size();
        std::string term = text.substr(pos, sep - pos);
        pos = sep + 3;

        auto bad = [&]() -> ConfigError {
            return ConfigError("cannot parse multiplier term '" + term + "'");
        };
        std::size_t star = term.find('*');
        MultiplierSpec::Term t;
        std::string coeff_text = (star == std::string::npos) ? term : term.substr(0, star);
        try {
            std::size_t used = 0;
            t.coefficient = std::stod(coeff_text, &used);
            if (used != coeff_text.size()) throw bad();
        } catch (const std::exception&) {
            throw bad();
        }
        if (star == std::string::npos) {
            t.compartment = -1;
            t.power = 0;
        } else {
            std::string rest = term.substr(star + 1);
            if (rest.size() < 2 || rest[0] != 's') throw bad();
            std::size_t caret = rest.find('^');
            std::string idx_text = rest.substr(1, caret == std::string::npos
                                                      ? std::string::npos
                                                      : caret - 1);
            try {
                std::size_t used = 0;
                t.compartment = static_cast<Index>(std::stoll(idx_text, &used));
                if (used != idx_text.size() || t.compartment < 0) throw bad();
            } catch (const std::exception&) {
                throw bad();
            }
            if (caret == std::string::npos) {
                t.power = 1;
            } else {
                const std::string p = rest.substr(caret + 1);
                if (p == "1" || p == "+1") {
                    t.power = 1;
                } else if (p == "-1") {
                    t.power = -1;
                } else if (p == "0") {
                    t.power = 0;
                } else {
                    throw bad();
                }
            }
        }
        spec.terms.push_back(t);
        if (sep == text.size()) break;
    }
    if (spec.terms.empty()) throw ConfigError("empty multiplier spec");
    return spec;
}

// ---------------------------------------------------------------------------
// Grid <-> manifest
// ---------------------------------------------------------------------------

inline void grid_to_manifest(const ConductivityGrid& grid, Manifest& m,
                             const std::string& prefix = "grid.") {
    m.set(prefix + "axes", static_cast<Index>(grid.n_axes()));
    for (Index d = 0; d < grid.n_axes(); ++d) {
        const GridAxis& ax = grid.axes()[static_cast<std::size_t>(d)];
        const std::string p = prefix + std::to_string(d) + ".";
        m.set(p + "lo", ax.lo);
        m.set(p + "hi", ax.hi);
        m.set(p + "count", ax.count);
        m.set(p + "scale", ax.scale == AxisScale::Linear ? "lin" : "log");
    }
}

inline ConductivityGrid grid_from_manifest(const Manifest& m, const std::string& prefix = "grid.") {
    const Index n = m.require_index(prefix + "axes");
    std::vector<GridAxis> axes;
    for (Index d = 0; d < n; ++d) {
        const std::string p = prefix + std::to_string(d) + ".";
        GridAxis ax;
        ax.lo = m.require_double(p + "lo");
        ax.hi = m.require_double(p + "hi");
        ax.count = m.require_index(p + "count");
        const std::string scale = m.require_string(p + "scale");
        if (scale == "lin") {
            ax.scale = AxisScale::Linear;
        } else if (scale == "log") {
            ax.scale = AxisScale::Log;
        } else {
            throw ConfigError("field '" + p + "scale' must be 'lin' or 'log', got '" + scale + "'");
        }
        axes.push_back(ax);
    }
    return ConductivityGrid::regular(std::move(axes));
}

/// Parses a compact axis list: "lo:hi:count:lin,lo:hi:count:log,...".
inline std::vector<GridAxis> parse_axis_list(const std::string& text) {
    std::vector<GridAxis> axes;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (part.empty()) {
            if (comma == text.size()) break;
            throw ConfigError("empty axis in grid spec '" + text + "'");
        }
        std::vector<std::string> fields;
        std::size_t p2 = 0;
        while (p2 <= part.size()) {
            std::size_t colon = part.find(':', p2);
            if (colon == std::string::npos) colon = part.size();
            fields.push_back(part.substr(p2, colon - p2));
            p2 = colon + 1;
            if (colon == part.size()) break;
        }
        if (fields.size() != 4) {
            throw ConfigError("axis spec '" + part + "' must be lo:hi:count:scale");
        }
        GridAxis ax;
        try {
            ax.lo = std::stod(fields[0]);
            ax.hi = std::stod(fields[1]);
            ax.count = static_cast<Index>(std::stoll(fields[2]));
        } catch (const std::exception&) {
            throw ConfigError("bad numbers in axis spec '" + part + "'");
        }
        if (fields[3] == "lin") {
            ax.scale = AxisScale::Linear;
        } else if (fields[3] == "log") {
            ax.scale = AxisScale::Log;
        } else {
            throw ConfigError("axis scale must be 'lin' or 'log' in '" + part + "'");
        }
        axes.push_back(ax);
        if (comma == text.size()) break;
    }
    if (axes.empty()) throw ConfigError("grid spec '" + text + "' has no axes");
    return axes;
}

}  // namespace lfrb
