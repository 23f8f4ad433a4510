#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fiberspec/cache.hpp"
#include "fiberspec/config.hpp"
#include "fiberspec/diagnostics.hpp"

namespace fiberspec {

using ojson = nlohmann::ordered_json;

inline ojson json_vec3(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

inline ojson report_json(const IdentityReport& r, const std::string& config_hash) {
    ojson j;
    j["name"] = r.name;
    j["value"] = r.value;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["config_hash"] = config_hash;
    j["provenance"] = {{"xi", json_vec3(r.provenance.xi)},
                       {"e", r.provenance.e},
                       {"grid", hex16(r.provenance.grid_hash)}};
    if (!r.details.empty()) {
        ojson d;
        for (const auto& [key, value] : r.details) d[key] = value;
        j["details"] = d;
    }
    return j;
}

struct RunArtifacts {
    int exit_code = 0;
    std::vector<std::string> failures;
    std::vector<std::filesystem::path> files;
    std::string summary;
};

// Executes subcommands against a parsed config: builds the model, serves
// ground-state records through the cache, emits CSV/JSON artifacts, and
// enforces the exit-status contract (zero iff every emitted report passes).
class Runner {
public:
    explicit Runner(RunConfig cfg)
        : cfg_(std::move(cfg)),
          hash_(cfg_.hash_hex()),
          cache_(ResultCache::resolve_root(cfg_.output_directory), hash_,
                 cfg_.cache_cap_mib << 20) {}

    const RunConfig& config() const { return cfg_; }
    const std::string& config_hash() const { return hash_; }
    ResultCache& cache() { return cache_; }

    RunArtifacts run(const std::string& subcommand) {
        if (subcommand == "ground") return ground();
        if (subcommand == "dispersion") return dispersion_cmd();
        if (subcommand == "ir-sweep") return ir_sweep_cmd();
        if (subcommand == "check") return check_cmd();
        if (subcommand == "dump-modes") return dump_modes();
        throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
    }

    RunArtifacts ground() {
        const Model& model = this->model();
        const Vec3 xi = cfg_.xi_list.front();
        const FiberHamiltonian fh = model.hamiltonian(xi);
        const GroundStateRecord rec = cached_ground(xi);
        const Vec3 grad = cached_gradient(xi);

        std::vector<IdentityReport> reports;
        reports.push_back(feynman_hellmann_check(model, fh, rec, grad, kFeynmanHellmannTol));
        reports.push_back(photon_number_consistency(model, rec));
        reports.push_back(hermiticity_report(model, fh));

        ojson j;
        j["config_hash"] = hash_;
        j["xi"] = json_vec3(xi);
        j["E"] = rec.energy;
        j["t"] = rec.energy - xi.squaredNorm();
        j["gap"] = std::isfinite(rec.gap) ? ojson(rec.gap) : ojson(nullptr);
        j["cluster_size"] = rec.cluster.size();
        j["N_expect"] = model.ops().N.expectation(rec.psi).real();
        ojson v = ojson::array();
        for (int i = 0; i < 3; ++i) {
            v.push_back(fh.v[static_cast<std::size_t>(i)].expectation(rec.psi).real());
        }
        j["v_expect"] = v;
        j["grad_E_fd"] = json_vec3(grad);
        j["solver"] = {{"method", rec.solver.method},
                       {"iterations", rec.solver.iterations},
                       {"residual", rec.solver.residual}};
        j["defaults_applied"] = cfg_.defaults_applied;

        RunArtifacts out;
        attach_reports(j, reports, out);
        if (cfg_.write_json) out.files.push_back(write_json("ground.json", j));
        finish(out, "ground");
        return out;
    }

    RunArtifacts dispersion_cmd() {
        const Model& model = this->model();
        DispersionTable table;
        table.grid_hash = model.modes().hash();
        table.rows.resize(cfg_.xi_list.size());

        // Cache reads and writes stay on this thread; only the missing
        // solves fan out to the pool.
        std::vector<std::size_t> missing;
        std::vector<std::optional<GroundStateRecord>> records(cfg_.xi_list.size());
        for (std::size_t i = 0; i < cfg_.xi_list.size(); ++i) {
            records[i] = cache_.load(ground_key(cfg_.xi_list[i]));
            if (!records[i]) missing.push_back(i);
        }
        std::vector<std::optional<GroundStateRecord>> fresh(missing.size());
        std::vector<std::string> errors(missing.size());
        parallel_for(
            missing.size(),
            [&](std::size_t m) {
                try {
                    fresh[m] = solve_ground(model, cfg_.xi_list[missing[m]],
                                            cfg_.eigen_options());
                } catch (const std::exception& ex) {
                    errors[m] = ex.what();
                }
            },
            cfg_.workers);
        for (std::size_t m = 0; m < missing.size(); ++m) {
            if (fresh[m]) {
                cache_.store(ground_key(cfg_.xi_list[missing[m]]), *fresh[m]);
                records[missing[m]] = std::move(fresh[m]);
            }
        }

        RunArtifacts out;
        for (std::size_t i = 0; i < cfg_.xi_list.size(); ++i) {
            DispersionRow& row = table.rows[i];
            row.xi = cfg_.xi_list[i];
            if (!records[i]) {
                row.ok = false;
                std::size_t m = std::find(missing.begin(), missing.end(), i) - missing.begin();
                row.error = m < errors.size() ? errors[m] : "solver failure";
                out.failures.push_back("dispersion_row_" + std::to_string(i) + ": " + row.error);
                continue;
            }
            const GroundStateRecord& rec = *records[i];
            const FiberHamiltonian fh = model.hamiltonian(row.xi);
            row.ok = true;
            row.energy = rec.energy;
            row.t = rec.energy - row.xi.squaredNorm();
            row.n_expect = model.ops().N.expectation(rec.psi).real();
            for (int d = 0; d < 3; ++d) {
                row.v_expect[d] = fh.v[static_cast<std::size_t>(d)].expectation(rec.psi).real();
            }
            row.gap = rec.gap;
            row.iterations = rec.solver.iterations;
            row.residual = rec.solver.residual;
        }

        if (cfg_.write_csv) {
            std::ostringstream csv;
            csv << "# config_hash=" << hash_ << "\r\n";
            table.to_csv(csv);
            out.files.push_back(write_text("dispersion.csv", csv.str()));
        }
        finish(out, "dispersion");
        return out;
    }

    RunArtifacts ir_sweep_cmd() {
        if (cfg_.grid.radial_scheme != RadialScheme::Logarithmic) {
            throw ConfigError("grid.radial_scheme must be log for ir-sweep");
        }
        IRSweepOptions opts;
        opts.eigen = cfg_.eigen_options();
        opts.r_per_decade = cfg_.r_per_decade;
        opts.workers = cfg_.workers;
        const Vec3 xi = cfg_.xi_list.front();
        const IRSweepReport report = ir_sweep(cfg_.model_spec(), xi, cfg_.sigma_list, opts);

        RunArtifacts out;
        for (const auto& row : report.rows) {
            if (!row.ok) {
                out.failures.push_back("ir_sweep_sigma_" + format_double(row.sigma) + ": " +
                                       row.error);
            }
        }
        if (!report.fit_valid) {
            out.failures.push_back("ir_sweep_fit: need >= 4 points");
        }

        ojson j;
        j["config_hash"] = hash_;
        j["xi"] = json_vec3(xi);
        j["fit_valid"] = report.fit_valid;
        j["slope"] = report.slope;
        j["intercept"] = report.intercept;
        j["r_squared"] = report.r_squared;
        ojson rows = ojson::array();
        for (const auto& row : report.rows) {
            ojson r;
            r["sigma"] = row.sigma;
            r["ok"] = row.ok;
            if (row.ok) {
                r["E"] = row.energy;
                r["N_expect"] = row.n_expect;
                r["min_shell_k"] = row.min_shell_k;
                r["n_max"] = row.n_max;
                r["dim"] = row.dim;
            } else {
                r["error"] = row.error;
            }
            rows.push_back(r);
        }
        j["rows"] = rows;
        if (cfg_.write_json) out.files.push_back(write_json("ir_sweep.json", j));
        if (cfg_.write_csv) {
            std::ostringstream csv;
            csv << "# config_hash=" << hash_ << "\r\n";
            report.to_csv(csv);
            out.files.push_back(write_text("ir_sweep.csv", csv.str()));
        }
        finish(out, "ir-sweep");
        return out;
    }

    RunArtifacts check_cmd() {
        const Model& model = this->model();
        const Vec3 xi = cfg_.xi_list.front();
        const FiberHamiltonian fh = model.hamiltonian(xi);
        const GroundStateRecord rec = cached_ground(xi);
        const Vec3 grad = cached_gradient(xi);
        const ConeSpec cone{grad, cfg_.epsilon};

        std::vector<IdentityReport> reports;
        reports.push_back(hermiticity_report(model, fh));
        reports.push_back(ccr_report(model));
        reports.push_back(feynman_hellmann_check(model, fh, rec, grad, kFeynmanHellmannTol));
        reports.push_back(photon_number_consistency(model, rec));

        // Pull-through over every channel pointing into K. Channels whose
        // shift fails positivity sit outside the identity's validity region
        // and are listed as skipped rather than failed.
        ojson skipped = ojson::array();
        PullThroughOptions pt;
        pt.eigen = cfg_.eigen_options();
        for (int c = 0; c < model.modes().num_channels(); ++c) {
            const Mode& m = model.modes().modes()[static_cast<std::size_t>(c / 2)];
            if (!cone_membership(m.k / m.k_abs, cone).in_k) continue;
            try {
                IdentityReport r = pull_through_residual(model, fh, rec, c, pt, 0.0);
                r.tolerance = 10.0 * r.details.at("topweight") + 10.0 * cfg_.tol;
                r.pass = r.value <= r.tolerance;
                reports.push_back(std::move(r));
            } catch (const IndefiniteShiftError& err) {
                skipped.push_back({{"channel", c}, {"shift_gap", err.lowest}});
            }
        }

        for (const Vec3& omega : cfg_.probe_directions) {
            reports.push_back(
                resolvent_limit_check(model, rec, cone, omega.normalized(), cfg_.k_ladder,
                                      cfg_.eigen_options(), kMonotonicityTol));
        }

        if (cfg_.xi_list.size() >= 3) {
            const DispersionTable table =
                dispersion(model, cfg_.xi_list, cfg_.eigen_options(), cfg_.workers);
            reports.push_back(concavity_probe(table, 2.0 * cfg_.tol));
        }

        ojson j;
        j["config_hash"] = hash_;
        j["xi"] = json_vec3(xi);
        j["grad_E_fd"] = json_vec3(grad);
        j["epsilon"] = cfg_.epsilon;
        if (!skipped.empty()) j["skipped_channels"] = skipped;

        RunArtifacts out;
        attach_reports(j, reports, out);
        if (cfg_.write_json) out.files.push_back(write_json("check.json", j));
        finish(out, "check");
        return out;
    }

    RunArtifacts dump_modes() {
        const Model& model = this->model();
        std::ostringstream csv;
        csv << "# config_hash=" << hash_ << "\r\n";
        dump_modes_csv(model.modes(), csv);
        RunArtifacts out;
        out.files.push_back(write_text("modes.csv", csv.str()));
        finish(out, "dump-modes");
        return out;
    }

    // Ground-state record served through the checksummed cache.
    GroundStateRecord cached_ground(const Vec3& xi) {
        const std::string key = ground_key(xi);
        if (auto hit = cache_.load(key)) return std::move(*hit);
        GroundStateRecord rec = solve_ground(model(), xi, cfg_.eigen_options());
        cache_.store(key, rec);
        return rec;
    }

    Vec3 cached_gradient(const Vec3& xi) {
        const double h = cfg_.fd_step;
        Vec3 grad;
        for (int i = 0; i < 3; ++i) {
            Vec3 xp = xi, xm = xi;
            xp[i] += h;
            xm[i] -= h;
            grad[i] = (cached_ground(xp).energy - cached_ground(xm).energy) / (2.0 * h);
        }
        return grad;
    }

private:
    static constexpr double kFeynmanHellmannTol = 1e-4;
    static constexpr double kMonotonicityTol = 0.0;

    std::string ground_key(const Vec3& xi) const {
        return "ground|xi=" + format_double(xi.x()) + "," + format_double(xi.y()) + "," +
               format_double(xi.z());
    }

    IdentityReport hermiticity_report(const Model& model, const FiberHamiltonian& fh) const {
        const double scale = std::max(1.0, fh.H.max_abs_entry());
        double value;
        if (model.dim() <= 2000) {
            value = fh.H.is_hermitian_entrywise(0.0) ? 0.0 : 1.0;
        } else {
            value = fh.H.hermitian_spot_residual(cfg_.seed, 1000) / scale;
        }
        IdentityReport r = IdentityReport::make("hermiticity", value, 1e-12,
                                                provenance_of(model, fh.xi));
        r.details["dim"] = static_cast<double>(model.dim());
        return r;
    }

    // Worst ladder-commutator defect: [a_mu, a_nu*] - delta restricted below
    // the top layer, and [a_mu, a_nu] everywhere. All pairs for small
    // channel counts, a seeded sample beyond that.
    IdentityReport ccr_report(const Model& model) const {
        const FockBasis& basis = model.basis();
        const int channels = basis.num_channels();
        std::vector<std::pair<int, int>> pairs;
        if (channels <= 16) {
            for (int mu = 0; mu < channels; ++mu) {
                for (int nu = mu; nu < channels; ++nu) pairs.emplace_back(mu, nu);
            }
        } else {
            std::mt19937_64 rng(cfg_.seed);
            for (int draw = 0; draw < 64; ++draw) {
                pairs.emplace_back(static_cast<int>(rng() % channels),
                                   static_cast<int>(rng() % channels));
            }
        }
        const Index cut = basis.n_max() >= 1 ? basis.sector_end(basis.n_max() - 1)
                                             : basis.size();
        double worst = 0.0;
        for (const auto& [mu, nu] : pairs) {
            const SparseOperator a_mu = annihilation_matrix(basis, mu);
            const SparseOperator a_nu = annihilation_matrix(basis, nu);
            SparseOperator comm = a_mu * a_nu.adjoint() - a_nu.adjoint() * a_mu;
            if (mu == nu) comm = comm - SparseOperator::identity(basis.size());
            const auto& m = comm.matrix();
            for (Index r = 0; r < cut; ++r) {
                for (SparseOperator::Storage::InnerIterator it(m, r); it; ++it) {
                    if (it.col() < cut) worst = std::max(worst, std::abs(it.value()));
                }
            }
            worst = std::max(worst, (a_mu * a_nu - a_nu * a_mu).max_abs_entry());
        }
        IdentityReport r = IdentityReport::make("truncated_ccr", worst, 1e-12,
                                                provenance_of(model, Vec3::Zero()));
        r.details["pairs_checked"] = static_cast<double>(pairs.size());
        return r;
    }

    void attach_reports(ojson& j, const std::vector<IdentityReport>& reports,
                        RunArtifacts& out) {
        ojson arr = ojson::array();
        for (const auto& r : reports) {
            arr.push_back(report_json(r, hash_));
            if (!r.pass) out.failures.push_back(r.name);
        }
        j["reports"] = arr;
        j["pass"] = out.failures.empty();
        j["failures"] = out.failures;
    }

    void finish(RunArtifacts& out, const std::string& subcommand) {
        out.exit_code = out.failures.empty() ? 0 : 1;
        std::ostringstream s;
        s << subcommand << ": " << (out.failures.empty() ? "pass" : "FAIL") << " (config "
          << hash_ << ", " << out.files.size() << " artifact"
          << (out.files.size() == 1 ? "" : "s") << ")";
        out.summary = s.str();
    }

    std::filesystem::path write_text(const std::string& name, const std::string& content) {
        const std::filesystem::path dir(cfg_.output_directory);
        std::filesystem::create_directories(dir);
        const std::filesystem::path path = dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
        return path;
    }

    std::filesystem::path write_json(const std::string& name, const ojson& j) {
        return write_text(name, j.dump(2) + "\n");
    }

    const Model& model() {
        if (!model_) model_ = std::make_unique<Model>(cfg_.model_spec());
        return *model_;
    }

    RunConfig cfg_;
    std::string hash_;
    ResultCache cache_;
    std::unique_ptr<Model> model_;
};

}  // namespace fiberspec
