#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "fiberspec/runner.hpp"

using namespace fiberspec;
namespace fs = std::filesystem;

namespace {

// Fresh working directory per test, removed on scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() / ("fiberspec_test_" + hex16(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

const char* kBaseConfig = R"(
# comment line
[coupling]
e = 0.2
lambda_uv = 1.0
sigma_ir = 0.1

[grid]
radial_scheme = linear
r = 2
angular_scheme = axes6

[truncation]
n_max = 2

[task]
xi_list = 0.3,0,0
)";

RunConfig base_config(const fs::path& out_dir) {
    RunConfig cfg = parse_config_text(kBaseConfig);
    cfg.output_directory = out_dir.string();
    return cfg;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config defaults are applied and echoed") {
    const RunConfig cfg = parse_config_text("[coupling]\ne = 0.1\nlambda_uv = 2.0\n");
    CHECK(cfg.coupling.sigma_ir == 0.1);  // 0.05 * lambda_uv
    REQUIRE_FALSE(cfg.defaults_applied.empty());
    CHECK(cfg.defaults_applied.front().find("sigma_ir") != std::string::npos);
    CHECK(cfg.c_max == cfg.n_max);
}

TEST_CASE("config rejections carry context") {
    SECTION("cutoff ordering names both keys") {
        try {
            parse_config_text("[coupling]\nsigma_ir = 2.0\nlambda_uv = 1.0\n");
            FAIL("expected rejection");
        } catch (const ConfigError& err) {
            const std::string what = err.what();
            CHECK(what.find("sigma_ir") != std::string::npos);
            CHECK(what.find("lambda_uv") != std::string::npos);
        }
    }
    SECTION("unknown keys are rejected with their line") {
        try {
            parse_config_text("[coupling]\ne = 0.1\nbogus = 7\n");
            FAIL("expected rejection");
        } catch (const ConfigError& err) {
            CHECK(err.line_number == 3);
            CHECK(std::string(err.what()).find("coupling.bogus") != std::string::npos);
        }
    }
    SECTION("malformed values") {
        CHECK_THROWS_AS(parse_config_text("[solver]\ntol = fast\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("[coupling]\nspin = maybe\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("[task]\nxi_list = 1,2\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("no_section = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("[nowhere]\nx = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("[task]\nsigma_list = 0.1,0.2\n"), ConfigError);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(parse_config("/nonexistent/path.ini"), ConfigError);
    }
}

TEST_CASE("canonical hash ignores formatting and ordering") {
    const RunConfig a = parse_config_text(
        "[coupling]\ne = 0.2\nsigma_ir = 0.1\n[grid]\nr = 2\n[truncation]\nn_max = 2\n");
    const RunConfig b = parse_config_text(
        "[truncation]\nn_max = 2\n[grid]\nr   =   2\n[coupling]\nsigma_ir = 0.1\ne = 0.20000\n");
    CHECK(a.canonical_hash() == b.canonical_hash());

    const RunConfig c = parse_config_text(
        "[coupling]\ne = 0.3\nsigma_ir = 0.1\n[grid]\nr = 2\n[truncation]\nn_max = 2\n");
    CHECK(a.canonical_hash() != c.canonical_hash());
}

TEST_CASE("record serialization round-trips") {
    GroundStateRecord rec;
    rec.xi = Vec3(0.1, -0.2, 0.3);
    rec.energy = 0.42;
    rec.gap = 0.01;
    rec.solver = {17, 3.5e-11, "lanczos"};
    rec.psi = Vec::Zero(4);
    rec.psi << cplx(1, 2), cplx(3, -4), cplx(0, 0), cplx(-1, 0.5);
    rec.cluster = {rec.psi, 2.0 * rec.psi};

    const auto restored = deserialize_record(serialize_record(rec));
    REQUIRE(restored.has_value());
    CHECK(restored->xi == rec.xi);
    CHECK(restored->energy == rec.energy);
    CHECK(restored->gap == rec.gap);
    CHECK(restored->solver.iterations == 17);
    CHECK(restored->solver.method == "lanczos");
    CHECK(restored->psi == rec.psi);
    REQUIRE(restored->cluster.size() == 2);
    CHECK(restored->cluster[1] == rec.cluster[1]);

    CHECK_FALSE(deserialize_record("garbage").has_value());
}

TEST_CASE("cache round-trip, corruption, and eviction") {
    TempDir tmp;
    GroundStateRecord rec;
    rec.xi = Vec3(0.3, 0, 0);
    rec.energy = 0.09;
    rec.psi = Vec::Ones(8);
    rec.cluster = {rec.psi};
    rec.solver = {0, 1e-14, "dense"};

    SECTION("hit returns the stored payload") {
        ResultCache cache(tmp.path, "deadbeef00000000");
        CHECK_FALSE(cache.load("ground|xi=a").has_value());
        cache.store("ground|xi=a", rec);
        const auto hit = cache.load("ground|xi=a");
        REQUIRE(hit.has_value());
        CHECK(hit->energy == rec.energy);
        CHECK(hit->psi == rec.psi);
        CHECK(cache.hits() == 1);

        // A second cache instance over the same directory sees the entry.
        ResultCache reopened(tmp.path, "deadbeef00000000");
        CHECK(reopened.load("ground|xi=a").has_value());
    }

    SECTION("checksum mismatch forces a recompute") {
        ResultCache cache(tmp.path, "deadbeef00000000");
        cache.store("ground|xi=a", rec);
        // Corrupt the payload behind the manifest's back.
        for (const auto& entry : fs::directory_iterator(cache.directory())) {
            if (entry.path().extension() == ".bin") {
                std::fstream f(entry.path(), std::ios::in | std::ios::out | std::ios::binary);
                f.seekp(16);
                f.put('\x7f');
            }
        }
        CHECK_FALSE(cache.load("ground|xi=a").has_value());
        CHECK(cache.hits() == 0);
        // The entry is gone; storing again repairs it.
        cache.store("ground|xi=a", rec);
        CHECK(cache.load("ground|xi=a").has_value());
    }

    SECTION("least recently used entries are evicted at the cap") {
        const std::size_t payload = serialize_record(rec).size();
        ResultCache cache(tmp.path, "deadbeef00000000", 3 * payload + payload / 2);
        cache.store("a", rec);
        cache.store("b", rec);
        cache.store("c", rec);
        REQUIRE(cache.load("a").has_value());  // refresh a
        cache.store("d", rec);                 // pushes total over the cap
        CHECK(cache.load("a").has_value());
        CHECK_FALSE(cache.load("b").has_value());  // oldest access, evicted
        CHECK(cache.load("d").has_value());
    }

    SECTION("environment variable overrides the root") {
        const fs::path special = tmp.path / "env_root";
        setenv("FIBERSPEC_CACHE_DIR", special.c_str(), 1);
        const fs::path resolved = ResultCache::resolve_root("ignored");
        unsetenv("FIBERSPEC_CACHE_DIR");
        CHECK(resolved == special);
        CHECK(ResultCache::resolve_root("outdir") == fs::path("outdir") / "cache");
    }
}

TEST_CASE("ground subcommand emits a passing report bundle") {
    TempDir tmp;
    Runner runner(base_config(tmp.path / "out"));
    const auto out = runner.run("ground");
    CHECK(out.exit_code == 0);
    CHECK(out.failures.empty());
    REQUIRE(out.files.size() == 1);
    const std::string body = read_file(out.files.front());
    CHECK(body.find("\"pass\": true") != std::string::npos);
    CHECK(body.find(runner.config_hash()) != std::string::npos);
}

TEST_CASE("dispersion artifacts are bitwise reproducible") {
    TempDir tmp;
    RunConfig cfg = base_config(tmp.path / "out");
    cfg.xi_list = {Vec3(-0.2, 0, 0), Vec3(-0.1, 0, 0), Vec3(0, 0, 0), Vec3(0.1, 0, 0),
                   Vec3(0.2, 0, 0)};

    Runner first(cfg);
    const auto a = first.run("dispersion");
    REQUIRE(a.exit_code == 0);
    const std::string csv_a = read_file(a.files.front());

    Runner second(cfg);  // second run is served from the cache
    const auto b = second.run("dispersion");
    const std::string csv_b = read_file(b.files.front());
    CHECK(csv_a == csv_b);
    CHECK(second.cache().hits() == cfg.xi_list.size());

    CHECK(csv_a.starts_with("# config_hash=" + cfg.hash_hex()));
    CHECK(csv_a.find("xi_x,xi_y,xi_z,E,t,N_expect,gap,iters,residual") != std::string::npos);
}

TEST_CASE("ir-sweep refuses to fit three points") {
    TempDir tmp;
    RunConfig cfg = base_config(tmp.path / "out");
    cfg.grid.radial_scheme = RadialScheme::Logarithmic;
    cfg.coupling.e = 0.0;
    cfg.sigma_list = {0.1, 0.05, 0.025};
    cfg.r_per_decade = 2.0;
    Runner runner(cfg);
    const auto out = runner.run("ir-sweep");
    CHECK(out.exit_code != 0);
    REQUIRE_FALSE(out.failures.empty());
    CHECK(out.failures.back().find("need >= 4 points") != std::string::npos);
}

TEST_CASE("ir-sweep requires the logarithmic scheme") {
    TempDir tmp;
    RunConfig cfg = base_config(tmp.path / "out");
    Runner runner(cfg);
    CHECK_THROWS_AS(runner.run("ir-sweep"), ConfigError);
}

TEST_CASE("check subcommand passes on a free-field config") {
    TempDir tmp;
    RunConfig cfg = base_config(tmp.path / "out");
    cfg.coupling.e = 0.0;
    cfg.xi_list = {Vec3(0.3, 0, 0), Vec3(0.2, 0, 0), Vec3(0.1, 0, 0)};
    Runner runner(cfg);
    const auto out = runner.run("check");
    CHECK(out.exit_code == 0);
    CHECK(out.failures.empty());
    const std::string body = read_file(out.files.front());
    CHECK(body.find("\"truncated_ccr\"") != std::string::npos);
    CHECK(body.find("\"concavity\"") != std::string::npos);
    CHECK(body.find("\"resolvent_limit\"") != std::string::npos);
}

TEST_CASE("dump-modes writes the audit table") {
    TempDir tmp;
    Runner runner(base_config(tmp.path / "out"));
    const auto out = runner.run("dump-modes");
    REQUIRE(out.exit_code == 0);
    const std::string body = read_file(out.files.front());
    CHECK(body.starts_with("# config_hash="));
    CHECK(body.find("m,kx,ky,kz,k_abs,w,g,") != std::string::npos);
}

TEST_CASE("unknown subcommands are rejected") {
    TempDir tmp;
    Runner runner(base_config(tmp.path / "out"));
    CHECK_THROWS_AS(runner.run("fly"), std::invalid_argument);
}
