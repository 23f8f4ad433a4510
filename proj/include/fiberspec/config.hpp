#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fiberspec/errors.hpp"
#include "fiberspec/spectral.hpp"
#include "fiberspec/util.hpp"

namespace fiberspec {

// Full run configuration. Parsed from line-oriented `key = value` files with
// [section] headers; every key has a documented default, unknown keys are
// rejected, and the canonical hash identifies the semantic content.
struct RunConfig {
    // [coupling]
    CouplingParams coupling;

    // [grid]
    FieldDiscretization grid;

    // [truncation]
    int n_max = 2;
    int c_max = -1;  // -1: follow n_max

    // [solver]
    double tol = 1e-10;
    int max_iter = 500;
    std::uint64_t seed = 42;
    Index dense_threshold = 2000;
    unsigned workers = 0;  // 0: hardware concurrency

    // [task]
    std::vector<Vec3> xi_list{Vec3(0.3, 0.0, 0.0)};
    std::vector<double> sigma_list{0.1, 0.05, 0.025, 0.0125, 0.00625};
    std::vector<Vec3> probe_directions{Vec3(0.0, 1.0, 0.0)};
    std::vector<double> k_ladder{0.2, 0.1, 0.05};
    double epsilon = 0.5;
    double fd_step = 1e-3;
    double r_per_decade = 4.0;

    // [output]
    std::string output_directory = "out";
    bool write_csv = true;
    bool write_json = true;
    std::uint64_t cache_cap_mib = 2048;

    std::vector<std::string> defaults_applied;  // echoed by the CLI

    ModelSpec model_spec() const {
        ModelSpec spec;
        spec.coupling = coupling;
        spec.grid = grid;
        spec.n_max = n_max;
        spec.c_max = c_max;
        return spec;
    }

    EigenOptions eigen_options() const {
        EigenOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        o.seed = seed;
        o.dense_threshold = dense_threshold;
        return o;
    }

    // Canonical content hash: effective key/value pairs, normalized and
    // sorted, so key order and formatting do not matter.
    std::uint64_t canonical_hash() const {
        std::vector<std::string> pairs;
        auto put = [&pairs](const std::string& key, const std::string& value) {
            pairs.push_back(key + "=" + value);
        };
        auto put_d = [&](const std::string& key, double v) { put(key, format_double(v)); };
        auto put_b = [&](const std::string& key, bool v) { put(key, v ? "true" : "false"); };
        auto put_vec3_list = [&](const std::string& key, const std::vector<Vec3>& vs) {
            std::string s;
            for (const auto& v : vs) {
                if (!s.empty()) s += ";";
                s += format_double(v.x()) + "," + format_double(v.y()) + "," +
                     format_double(v.z());
            }
            put(key, s);
        };
        auto put_list = [&](const std::string& key, const std::vector<double>& vs) {
            std::string s;
            for (double v : vs) {
                if (!s.empty()) s += ",";
                s += format_double(v);
            }
            put(key, s);
        };

        put_d("coupling.e", coupling.e);
        put_d("coupling.lambda_uv", coupling.lambda_uv);
        put_d("coupling.sigma_ir", coupling.sigma_ir);
        put_b("coupling.spin", coupling.spin);
        put("grid.radial_scheme",
            grid.radial_scheme == RadialScheme::Linear ? "linear" : "log");
        put("grid.r", std::to_string(grid.radial_shells));
        put("grid.angular_scheme", grid.angular_scheme == AngularScheme::Axes6 ? "axes6"
                                   : grid.angular_scheme == AngularScheme::Icosa12
                                       ? "icosa12"
                                       : "product");
        put("grid.n_theta", std::to_string(grid.n_theta));
        put("grid.n_phi", std::to_string(grid.n_phi));
        put_b("grid.antipodal", grid.antipodal_symmetric);
        put("truncation.n_max", std::to_string(n_max));
        put("truncation.c_max", std::to_string(c_max < 0 ? n_max : c_max));
        put_d("solver.tol", tol);
        put("solver.max_iter", std::to_string(max_iter));
        put("solver.seed", std::to_string(seed));
        put("solver.dense_threshold", std::to_string(dense_threshold));
        put("solver.workers", std::to_string(workers));
        put_vec3_list("task.xi_list", xi_list);
        put_list("task.sigma_list", sigma_list);
        put_vec3_list("task.probe_directions", probe_directions);
        put_list("task.k_ladder", k_ladder);
        put_d("task.epsilon", epsilon);
        put_d("task.fd_step", fd_step);
        put_d("task.r_per_decade", r_per_decade);
        put("output.directory", output_directory);
        put_b("output.write_csv", write_csv);
        put_b("output.write_json", write_json);
        put("output.cache_cap_mib", std::to_string(cache_cap_mib));

        std::sort(pairs.begin(), pairs.end());
        std::string joined;
        for (const auto& p : pairs) {
            joined += p;
            joined += '\n';
        }
        return fnv1a64(joined);
    }

    std::string hash_hex() const { return hex16(canonical_hash()); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline double parse_number(const std::string& key, const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'", line);
    }
}

inline long parse_integer(const std::string& key, const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'", line);
    }
}

inline bool parse_bool(const std::string& key, const std::string& value, int line) {
    const std::string v = lower(value);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'", line);
}

inline std::vector<double> parse_number_list(const std::string& key, const std::string& value,
                                             int line) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(key + ": empty list element", line);
        out.push_back(parse_number(key, item, line));
    }
    if (out.empty()) throw ConfigError(key + ": empty list", line);
    return out;
}

inline Vec3 parse_triple(const std::string& key, const std::string& value, int line) {
    const auto parts = parse_number_list(key, value, line);
    if (parts.size() != 3) {
        throw ConfigError(key + ": expected a comma triple, got '" + value + "'", line);
    }
    return Vec3(parts[0], parts[1], parts[2]);
}

inline std::vector<Vec3> parse_triple_list(const std::string& key, const std::string& value,
                                           int line) {
    std::vector<Vec3> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_triple(key, item, line));
    }
    if (out.empty()) throw ConfigError(key + ": empty vector list", line);
    return out;
}

}  // namespace detail

// Parses the `[section]` / `key = value` format. Lines starting with '#' or
// ';' are comments. Unknown sections or keys are rejected with the line
// number; range violations name the offending keys.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    bool sigma_given = false;
    bool c_max_given = false;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = detail::lower(detail::trim(line.substr(1, line.size() - 2)));
            if (section != "coupling" && section != "grid" && section != "truncation" &&
                section != "solver" && section != "task" && section != "output") {
                throw ConfigError("unknown section [" + section + "]", line_no);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
        const std::string key = detail::lower(detail::trim(line.substr(0, eq)));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no);
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
        const std::string qual = section + "." + key;

        if (qual == "coupling.e") {
            cfg.coupling.e = detail::parse_number(qual, value, line_no);
        } else if (qual == "coupling.lambda_uv") {
            cfg.coupling.lambda_uv = detail::parse_number(qual, value, line_no);
        } else if (qual == "coupling.sigma_ir") {
            cfg.coupling.sigma_ir = detail::parse_number(qual, value, line_no);
            sigma_given = true;
        } else if (qual == "coupling.spin") {
            cfg.coupling.spin = detail::parse_bool(qual, value, line_no);
        } else if (qual == "grid.radial_scheme") {
            const std::string v = detail::lower(value);
            if (v == "linear") {
                cfg.grid.radial_scheme = RadialScheme::Linear;
            } else if (v == "log" || v == "logarithmic") {
                cfg.grid.radial_scheme = RadialScheme::Logarithmic;
            } else {
                throw ConfigError("grid.radial_scheme: expected linear or log", line_no);
            }
        } else if (qual == "grid.r") {
            cfg.grid.radial_shells = static_cast<int>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "grid.angular_scheme") {
            const std::string v = detail::lower(value);
            if (v == "axes6") {
                cfg.grid.angular_scheme = AngularScheme::Axes6;
            } else if (v == "icosa12") {
                cfg.grid.angular_scheme = AngularScheme::Icosa12;
            } else if (v == "product") {
                cfg.grid.angular_scheme = AngularScheme::Product;
            } else {
                throw ConfigError("grid.angular_scheme: expected axes6, icosa12, or product",
                                  line_no);
            }
        } else if (qual == "grid.n_theta") {
            cfg.grid.n_theta = static_cast<int>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "grid.n_phi") {
            cfg.grid.n_phi = static_cast<int>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "grid.antipodal") {
            cfg.grid.antipodal_symmetric = detail::parse_bool(qual, value, line_no);
        } else if (qual == "truncation.n_max") {
            cfg.n_max = static_cast<int>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "truncation.c_max") {
            cfg.c_max = static_cast<int>(detail::parse_integer(qual, value, line_no));
            c_max_given = true;
        } else if (qual == "solver.tol") {
            cfg.tol = detail::parse_number(qual, value, line_no);
        } else if (qual == "solver.max_iter") {
            cfg.max_iter = static_cast<int>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "solver.seed") {
            cfg.seed = static_cast<std::uint64_t>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "solver.dense_threshold") {
            cfg.dense_threshold = detail::parse_integer(qual, value, line_no);
        } else if (qual == "solver.workers") {
            cfg.workers = static_cast<unsigned>(detail::parse_integer(qual, value, line_no));
        } else if (qual == "task.xi_list") {
            cfg.xi_list = detail::parse_triple_list(qual, value, line_no);
        } else if (qual == "task.sigma_list") {
            cfg.sigma_list = detail::parse_number_list(qual, value, line_no);
        } else if (qual == "task.probe_directions") {
            cfg.probe_directions = detail::parse_triple_list(qual, value, line_no);
        } else if (qual == "task.k_ladder") {
            cfg.k_ladder = detail::parse_number_list(qual, value, line_no);
        } else if (qual == "task.epsilon") {
            cfg.epsilon = detail::parse_number(qual, value, line_no);
        } else if (qual == "task.fd_step") {
            cfg.fd_step = detail::parse_number(qual, value, line_no);
        } else if (qual == "task.r_per_decade") {
            cfg.r_per_decade = detail::parse_number(qual, value, line_no);
        } else if (qual == "output.directory") {
            cfg.output_directory = value;
        } else if (qual == "output.write_csv") {
            cfg.write_csv = detail::parse_bool(qual, value, line_no);
        } else if (qual == "output.write_json") {
            cfg.write_json = detail::parse_bool(qual, value, line_no);
        } else if (qual == "output.cache_cap_mib") {
            cfg.cache_cap_mib =
                static_cast<std::uint64_t>(detail::parse_integer(qual, value, line_no));
        } else {
            throw ConfigError("unknown key '" + qual + "'", line_no);
        }
    }

    if (!sigma_given) {
        cfg.coupling.sigma_ir = 0.05 * cfg.coupling.lambda_uv;
        cfg.defaults_applied.push_back("coupling.sigma_ir = " +
                                       format_double(cfg.coupling.sigma_ir) +
                                       " (0.05 * lambda_uv)");
    }
    if (!c_max_given) {
        cfg.c_max = cfg.n_max;
        cfg.defaults_applied.push_back("truncation.c_max = " + std::to_string(cfg.n_max) +
                                       " (n_max)");
    }

    // Range validation, naming the offending keys.
    if (!std::isfinite(cfg.coupling.e)) throw ConfigError("coupling.e must be finite");
    if (!(cfg.coupling.lambda_uv > 0.0)) throw ConfigError("coupling.lambda_uv must be > 0");
    if (!(cfg.coupling.sigma_ir > 0.0) || !(cfg.coupling.sigma_ir < cfg.coupling.lambda_uv)) {
        throw ConfigError("coupling.sigma_ir must satisfy 0 < sigma_ir < lambda_uv (got " +
                          format_double(cfg.coupling.sigma_ir) + " vs lambda_uv " +
                          format_double(cfg.coupling.lambda_uv) + ")");
    }
    if (cfg.grid.radial_shells < 1) throw ConfigError("grid.r must be >= 1");
    if (cfg.grid.angular_scheme == AngularScheme::Product &&
        (cfg.grid.n_theta < 1 || cfg.grid.n_phi < 1)) {
        throw ConfigError("grid.n_theta and grid.n_phi must be >= 1");
    }
    if (cfg.n_max < 0 || cfg.n_max > 255) throw ConfigError("truncation.n_max must be in [0, 255]");
    if (cfg.c_max < 0 || cfg.c_max > cfg.n_max) {
        throw ConfigError("truncation.c_max must be in [0, n_max]");
    }
    if (!(cfg.tol > 0.0)) throw ConfigError("solver.tol must be > 0");
    if (cfg.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
    if (cfg.dense_threshold < 0) throw ConfigError("solver.dense_threshold must be >= 0");
    if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 1.0)) {
        throw ConfigError("task.epsilon must lie in (0, 1)");
    }
    if (!(cfg.fd_step > 0.0)) throw ConfigError("task.fd_step must be > 0");
    if (!(cfg.r_per_decade > 0.0)) throw ConfigError("task.r_per_decade must be > 0");
    for (double s : cfg.sigma_list) {
        if (!(s > 0.0)) throw ConfigError("task.sigma_list entries must be > 0");
    }
    if (!std::is_sorted(cfg.sigma_list.rbegin(), cfg.sigma_list.rend())) {
        throw ConfigError("task.sigma_list must be strictly decreasing");
    }
    for (double k : cfg.k_ladder) {
        if (!(k > 0.0)) throw ConfigError("task.k_ladder entries must be > 0");
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace fiberspec
