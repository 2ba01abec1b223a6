#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "kpp/cli.hpp"
#include "kpp/config.hpp"
#include "kpp/generators.hpp"

using namespace kpp;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static const fs::path root = [] {
        auto p = fs::temp_directory_path() / ("kppctl_test_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = scratch() / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

struct Outcome {
    int code;
    std::string out, err;
};

Outcome kppctl(std::vector<std::string> args) {
    args.insert(args.begin(), "kppctl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> record(const fs::path& p) {
    std::map<std::string, std::string> kv;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> r;
        for (double v; ss >> v;) r.push_back(v);
        rows.push_back(r);
    }
    return rows;
}

std::string without_wall_time(std::string manifest) {
    const auto at = manifest.find("wall_time=");
    return at == std::string::npos ? manifest : manifest.substr(0, at);
}

const char* ring =
    R"("system": {"M": {"laplacian": {"sigmas": [1, 1, 1], "boundary": "periodic"}},
                  "C": {"circulant": {"phi": [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]}}})";

}  // namespace

TEST_CASE("check: gamma = 0.25 passes, gamma = 0.75 fails on the right half plane") {
    const auto ok = write_config("g025.json", R"({"system": {"n2": {"gamma": 0.25, "sigma": 0.5}}})");
    auto r = kppctl({"check", "--config", ok.string(), "--out", (scratch() / "g025").string()});
    CHECK(r.code == exit_ok);
    auto rep = record(scratch() / "g025" / "assumptions.txt");
    CHECK(rep["a3"] == "holds");
    CHECK(record(scratch() / "g025" / "manifest.txt")["status"] == "ok");

    const auto bad = write_config("g075.json", R"({"system": {"n2": {"gamma": 0.75, "sigma": 0.5}}})");
    r = kppctl({"check", "--config", bad.string(), "--out", (scratch() / "g075").string()});
    CHECK(r.code == exit_assumption_failure);
    rep = record(scratch() / "g075" / "assumptions.txt");
    CHECK(rep["a3_right_half_plane"] == "fails");
    CHECK(std::abs(std::stod(rep["a3_right_half_plane.evidence"]) + 0.5) <= 1e-12);
    CHECK(rep["a1"] == "holds");
    CHECK(rep["a2"] == "holds");
    auto man = record(scratch() / "g075" / "manifest.txt");
    CHECK(man["failed_items"] == "a3_right_half_plane");
    CHECK(man["status"] == "assumption-failure");

    // Asking only for A1 and A2 makes the same system pass.
    const auto partial =
        write_config("g075_a12.json", R"({"system": {"n2": {"gamma": 0.75, "sigma": 0.5}}, "check": {"require": ["a1", "a2"]}})");
    CHECK(kppctl({"check", "--config", partial.string(), "--out", (scratch() / "g075b").string()}).code == exit_ok);
}

TEST_CASE("usage errors are distinct from assumption failures") {
    const auto ragged = write_config("ragged.json", R"({"system": {"M": [[-1, 1], [1]], "C": [[1, 0], [0, 1]]}})");
    auto r = kppctl({"check", "--config", ragged.string(), "--out", (scratch() / "ragged").string()});
    CHECK(r.code == exit_usage);
    CHECK(r.err.find("square") != std::string::npos);
    CHECK(record(scratch() / "ragged" / "manifest.txt")["reason"] == "malformed-input");

    const auto syntax = write_config("syntax.json", R"({"system": {"n2": {"gamma": 0.25,)");
    CHECK(kppctl({"check", "--config", syntax.string(), "--out", (scratch() / "syntax").string()}).code == exit_usage);
    const auto nan = write_config("nan.json", R"({"system": {"M": [[-1, 1], [1, -1]], "C": [[1, "x"], [0, 1]]}})");
    CHECK(kppctl({"check", "--config", nan.string(), "--out", (scratch() / "nan").string()}).code == exit_usage);
    CHECK(kppctl({"check", "--config", (scratch() / "missing.json").string(), "--out", (scratch() / "m").string()}).code ==
          exit_usage);
    CHECK(kppctl({"check"}).code == exit_usage);
    CHECK(kppctl({"frobnicate", "--config", ragged.string()}).code == exit_usage);
    CHECK(kppctl({"check", "--config", ragged.string(), "--tol", "-1"}).code == exit_usage);
    CHECK(kppctl({"--help"}).code == exit_ok);
}

TEST_CASE("system exchange format round-trips bit for bit") {
    Rng rng(11);
    const SystemSpec spec = random_stable_system(5, rng);
    const Json j = Json::parse(system_to_json(spec).dump(2));
    const SystemSpec back = parse_system(j, std::nullopt).spec;
    CHECK(back.d() == spec.d());
    CHECK(std::ranges::equal(back.M().data(), spec.M().data()));
    CHECK(std::ranges::equal(back.C().data(), spec.C().data()));

    const auto cfg = write_config("random5.json", R"({"system": {"random": {"n": 5}}, "seed": 11})");
    REQUIRE(kppctl({"check", "--config", cfg.string(), "--out", (scratch() / "random5").string()}).code == exit_ok);
    const SystemSpec exported = parse_system(load_json_file(scratch() / "random5" / "system.json"), std::nullopt).spec;
    Rng again(11);
    CHECK(std::ranges::equal(exported.C().data(), random_stable_system(5, again).C().data()));
}

TEST_CASE("generator descriptors and inline matrices give the same system") {
    const auto gen = parse_system(Json::parse(R"({"M": {"laplacian": {"sigmas": [1, 2, 3]}}, "C": {"circulant": {"phi": [0.5, 0.3, 0.2]}}})"),
                                  std::nullopt);
    const Vector s{1, 2, 3}, phi{0.5, 0.3, 0.2};
    CHECK(gen.source == "generator");
    CHECK(std::ranges::equal(gen.spec.M().data(), make_discrete_laplacian(s, Boundary::periodic).data()));
    CHECK(std::ranges::equal(gen.spec.C().data(), make_circulant(phi).data()));
    CHECK(gen.spec.d() == Vector{1, 1, 1});
    CHECK_THROWS_AS(parse_system(Json::parse(R"({"n": 4, "M": [[-1, 1], [1, -1]], "C": [[1, 0], [0, 1]]})"), std::nullopt),
                    MalformedInput);
    CHECK_THROWS_AS(parse_system(Json::parse(R"({"random": {"n": 3}})"), std::nullopt), MalformedInput);
    CHECK_THROWS_AS(parse_system(Json::parse(R"({"M": {"spiral": {}}, "C": [[1]]})"), std::nullopt), MalformedInput);
}

TEST_CASE("equilibria: one row on a random A1-A3 instance, three rows at gamma = 0.8") {
    const auto cfg = write_config("eq_random.json", R"({"system": {"random": {"n": 5}}})");
    const auto dir = scratch() / "eq_random";
    REQUIRE(kppctl({"equilibria", "--config", cfg.string(), "--seed", "7", "--out", dir.string()}).code == exit_ok);
    const auto rows = csv_rows(dir / "equilibria.csv");
    REQUIRE(rows.size() == 1);
    for (std::size_t i = 1; i <= 5; ++i) CHECK(std::abs(rows[0][i] - 1.0) <= 1e-10);

    const auto bi = write_config("eq_bistable.json", R"({"system": {"n2": {"gamma": 0.8, "sigma": 0.05}}, "seed": 7})");
    REQUIRE(kppctl({"equilibria", "--config", bi.string(), "--out", (scratch() / "eq_bi").string()}).code == exit_ok);
    const auto three = csv_rows(scratch() / "eq_bi" / "equilibria.csv");
    REQUIRE(three.size() == 3);
    // Closed form for the asymmetric pair: u + v = S = 0.9 / 0.2, uv = (0.2 S^2 - S) / (2 - 3.2).
    const double S = 0.9 / 0.2, P = (0.2 * S * S - S) / (2 - 3.2);
    const double lo = S / 2 - std::sqrt(S * S / 4 - P), hi = S / 2 + std::sqrt(S * S / 4 - P);
    CHECK(std::abs(three[0][1] - lo) <= 1e-8);
    CHECK(std::abs(three[0][2] - hi) <= 1e-8);
    CHECK(std::abs(three[2][1] - hi) <= 1e-8);
    CHECK(three[1][1] == 1.0);
    CHECK(three[1][5] == 0.0);  // 1 unstable
    CHECK(three[0][5] == 1.0);
    CHECK(three[2][5] == 1.0);

    // Missing seed is a usage error for a stochastic command.
    CHECK(kppctl({"equilibria", "--config", cfg.string(), "--out", (scratch() / "noseed").string()}).code == exit_usage);
}

TEST_CASE("reruns are byte-identical") {
    const auto cfg = write_config("eq_det.json", R"({"system": {"random": {"n": 6}}, "seed": 3})");
    const auto a = scratch() / "det_a", b = scratch() / "det_b";
    REQUIRE(kppctl({"equilibria", "--config", cfg.string(), "--out", a.string()}).code == exit_ok);
    REQUIRE(kppctl({"equilibria", "--config", cfg.string(), "--out", b.string()}).code == exit_ok);
    CHECK(slurp(a / "equilibria.csv") == slurp(b / "equilibria.csv"));
    CHECK(without_wall_time(slurp(a / "manifest.txt")) == without_wall_time(slurp(b / "manifest.txt")));

    const auto field = write_config("field.json", R"({"system": {"n2": {"gamma": 0.25, "sigma": 0.5, "d": [1, 4]}},
        "simulate": {"mode": "field", "x_max": 30, "dx": 0.5, "t_end": 5, "snapshot_times": [1, 2],
                     "initial": {"level": [0.5, 1.5], "bump": {"amplitude": 0.5, "center": 15, "width": 2}}}})");
    REQUIRE(kppctl({"simulate", "--config", field.string(), "--out", a.string()}).code == exit_ok);
    REQUIRE(kppctl({"simulate", "--config", field.string(), "--out", b.string()}).code == exit_ok);
    CHECK(slurp(a / "snapshots.csv") == slurp(b / "snapshots.csv"));
    CHECK(slurp(a / "lyapunov.csv") == slurp(b / "lyapunov.csv"));
    CHECK(csv_rows(a / "snapshots.csv").size() == 4 * 61);
    auto man = record(a / "manifest.txt");
    CHECK(man["scheme"] == "imex");
    CHECK(man["dx"] == "0.5");
    CHECK(man.count("dt") == 1);
    CHECK(man.count("config_hash") == 1);
}

TEST_CASE("output directory: --out, then the environment, then the config") {
    const auto cfg = write_config("outdir.json",
                                  "{\"system\": {\"n2\": {\"gamma\": 0.25, \"sigma\": 0.5}}, \"out\": \"" +
                                      (scratch() / "from_config").string() + "\"}");
    ::setenv(out_dir_env, (scratch() / "from_env").string().c_str(), 1);
    CHECK(kppctl({"check", "--config", cfg.string()}).code == exit_ok);
    CHECK(fs::exists(scratch() / "from_env" / "manifest.txt"));
    CHECK(kppctl({"check", "--config", cfg.string(), "--out", (scratch() / "from_flag").string()}).code == exit_ok);
    CHECK(fs::exists(scratch() / "from_flag" / "manifest.txt"));
    ::unsetenv(out_dir_env);
    CHECK(kppctl({"check", "--config", cfg.string()}).code == exit_ok);
    CHECK(fs::exists(scratch() / "from_config" / "manifest.txt"));
}

TEST_CASE("bifurcate: gamma = 0.75 crosses at sigma = 0.25") {
    const auto cfg = write_config("bif.json", R"({"bifurcate": {"gamma": 0.75, "sigma_lo": 0.05, "sigma_hi": 0.6, "n_samples": 12}})");
    const auto dir = scratch() / "bif";
    REQUIRE(kppctl({"bifurcate", "--config", cfg.string(), "--seed", "5", "--out", dir.string()}).code == exit_ok);
    const auto th = csv_rows(dir / "thresholds.csv");
    REQUIRE(th.size() == 1);
    CHECK(std::abs(th[0][0] - 0.25) <= 1e-6);
    CHECK(csv_rows(dir / "diagram.csv").size() == 12);
    CHECK(kppctl({"bifurcate", "--config", cfg.string(), "--out", (scratch() / "bif_noseed").string()}).code == exit_usage);
}

TEST_CASE("wave: converged above c*, no-profile below") {
    const auto above = write_config("wave_above.json", std::string("{") + ring + R"(, "wave": {"c_offset": 0.5, "R": 60, "n_points": 1201}})");
    auto dir = scratch() / "wave_above";
    REQUIRE(kppctl({"wave", "--config", above.string(), "--out", dir.string()}).code == exit_ok);
    auto rec = record(dir / "profile.txt");
    CHECK(rec["converged"] == "1");
    CHECK(std::abs(std::stod(rec["c_star"]) - 2.0) <= 1e-6);
    const auto energy = csv_rows(dir / "energy.csv");
    REQUIRE(energy.size() == 5);
    for (const auto& row : energy) CHECK(row[3] >= -1e-4);

    const auto below = write_config("wave_below.json", std::string("{") + ring + R"(, "wave": {"c_offset": -0.5, "R": 60, "n_points": 1201}})");
    dir = scratch() / "wave_below";
    CHECK(kppctl({"wave", "--config", below.string(), "--out", dir.string()}).code == exit_divergence);
    auto man = record(dir / "manifest.txt");
    CHECK(man["reason"] == "no-profile");
    CHECK(man["status"] == "solver-divergence");
    CHECK_FALSE(fs::exists(dir / "profile.csv"));

    // A mutation matrix with a negative off-diagonal entry fails A1 before any solve.
    const auto no_a1 = write_config("wave_no_a1.json",
                                    R"({"system": {"M": [[1, -1], [-1, 1]], "C": [[0.5, 0.5], [0.5, 0.5]]}, "wave": {"c": 3}})");
    CHECK(kppctl({"wave", "--config", no_a1.string(), "--out", (scratch() / "no_a1").string()}).code ==
          exit_assumption_failure);
}

TEST_CASE("simulate: front run and its failure modes") {
    const auto cfg = write_config("front.json", std::string("{") + ring +
                                                    R"(, "simulate": {"domain_length": 200, "dx": 0.5, "t_end": 60}})");
    const auto dir = scratch() / "front";
    REQUIRE(kppctl({"simulate", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
    auto wake = record(dir / "wake.txt");
    CHECK(std::abs(std::stod(wake["measured_speed"]) - 2.0) <= 0.1);
    CHECK(csv_rows(dir / "front.csv").size() == 241);

    const auto fixed = write_config("front_fixed.json", std::string("{") + ring +
                                                            R"(, "simulate": {"domain_length": 100, "dx": 0.5, "t_end": 60, "comoving": false}})");
    CHECK(kppctl({"simulate", "--config", fixed.string(), "--out", (scratch() / "fixed").string()}).code == exit_divergence);
    CHECK(record(scratch() / "fixed" / "manifest.txt")["reason"] == "domain-too-short");

    const auto big_dt = write_config("front_dt.json", std::string("{") + ring +
                                                          R"(, "simulate": {"domain_length": 100, "dx": 0.5, "t_end": 10, "dt": 5}})");
    CHECK(kppctl({"simulate", "--config", big_dt.string(), "--out", (scratch() / "big_dt").string()}).code == exit_usage);
}

TEST_CASE("continuum: cane-toads preset reaches a converged wake") {
    const auto cfg = write_config("toads.json",
                                  R"({"continuum": {"preset": "cane_toads", "theta_lo": 1, "theta_hi": 2, "alpha": 0.1, "n_bins": 16}, "seed": 7})");
    const auto dir = scratch() / "toads";
    REQUIRE(kppctl({"continuum", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
    auto man = record(dir / "manifest.txt");
    CHECK(man["wake_verdict"] == "converged");
    CHECK(man["all_exact"] == "true");
    CHECK(man["n_stationary"] == "1");
    CHECK(record(dir / "wake.txt")["verdict"] == "converged");

    const auto degenerate = write_config("toads0.json", R"({"continuum": {"preset": "cane_toads", "theta_lo": 0}, "seed": 7})");
    CHECK(kppctl({"continuum", "--config", degenerate.string(), "--out", (scratch() / "toads0").string()}).code == exit_usage);
}

TEST_CASE("continuum: tabulated kernels resolve next to the config") {
    std::ofstream(scratch() / "k.csv") << "y,z,k\n0,0,1\n0,1,1\n1,0,1\n1,1,1\n";
    std::ofstream(scratch() / "m.csv") << "0,0,0.5\n0,1,0.5\n1,0,0.5\n1,1,0.5\n";
    const auto cfg = write_config("tab.json", R"({"system": {"continuum": {"theta_lo": 0, "theta_hi": 1, "n_bins": 8,
        "d": 1, "sigma": 0.01, "m": {"csv": "m.csv"}, "k": {"csv": "k.csv"}}}})");
    const auto dir = scratch() / "tab";
    REQUIRE(kppctl({"check", "--config", cfg.string(), "--out", dir.string()}).code == exit_ok);
    CHECK(record(dir / "assumptions.txt")["all_exact"] == "true");

    const auto missing = write_config("tab_missing.json", R"({"system": {"continuum": {"theta_lo": 0, "theta_hi": 1,
        "m": {"csv": "nope.csv"}, "k": 1}}})");
    CHECK(kppctl({"check", "--config", missing.string(), "--out", (scratch() / "tab_missing").string()}).code == exit_usage);
}
