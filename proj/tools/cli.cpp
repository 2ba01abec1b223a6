#include "kpp/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "kpp/config.hpp"
#include "kpp/continuum.hpp"
#include "kpp/equilibria.hpp"
#include "kpp/format.hpp"
#include "kpp/frontlab.hpp"

namespace kpp {

namespace fs = std::filesystem;

namespace {

// Flat key=value record, kept in insertion order.
class Record {
public:
    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : items_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        items_.emplace_back(key, std::move(value));
    }
    void set(const std::string& key, double value) { set(key, fmt(value)); }
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

    std::string text(const std::string& skip = {}) const {
        std::string s;
        for (const auto& [k, v] : items_)
            if (k != skip) s += k + "=" + v + "\n";
        return s;
    }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

// Config accessors. Wrong types surface as MalformedInput with the key named.
Json section(const Json& cfg, const char* key) {
    if (!cfg.contains(key)) return Json::object();
    if (!cfg.at(key).is_object()) throw MalformedInput(std::string("config: '") + key + "' must be an object");
    return cfg.at(key);
}

double num(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw MalformedInput(std::string("config: '") + key + "' must be a number");
    return j.at(key).get<double>();
}

double required_num(const Json& j, const char* key) {
    if (!j.contains(key)) throw MalformedInput(std::string("config: missing '") + key + "'");
    return num(j, key, 0.0);
}

int count(const Json& j, const char* key, int fallback, int lo = 1) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < lo)
        throw MalformedInput(std::string("config: '") + key + "' must be an integer >= " + std::to_string(lo));
    return j.at(key).get<int>();
}

bool flag(const Json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw MalformedInput(std::string("config: '") + key + "' must be true or false");
    return j.at(key).get<bool>();
}

std::string text(const Json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw MalformedInput(std::string("config: '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

Vector numbers(const Json& j, const char* key) {
    if (!j.contains(key)) return {};
    Vector v;
    if (j.at(key).is_array())
        for (const auto& x : j.at(key)) {
            if (!x.is_number()) break;
            v.push_back(x.get<double>());
        }
    if (!j.at(key).is_array() || v.size() != j.at(key).size())
        throw MalformedInput(std::string("config: '") + key + "' must be an array of numbers");
    return v;
}

Scheme scheme_of(const Json& j) {
    const std::string s = text(j, "scheme", "imex");
    if (s != "imex" && s != "rk4") throw MalformedInput("config: scheme must be imex or rk4");
    return parse_scheme(s);
}

FrontOptions front_options(const Json& j, FrontOptions o) {
    o.domain_length = num(j, "domain_length", o.domain_length);
    o.dx = num(j, "dx", o.dx);
    o.x0 = num(j, "x0", o.x0);
    o.t_end = num(j, "t_end", o.t_end);
    o.dt = num(j, "dt", o.dt);
    o.scheme = scheme_of(j);
    o.perturbation = num(j, "perturbation", o.perturbation);
    o.comoving = flag(j, "comoving", o.comoving);
    o.record_interval = num(j, "record_interval", o.record_interval);
    o.snapshot_times = numbers(j, "snapshot_times");
    return o;
}

std::vector<std::pair<std::string, Check>> items(const AssumptionReport& r) {
    return {{"a1_essentially_nonnegative", r.a1_essentially_nonnegative},
            {"a1_irreducible", r.a1_irreducible},
            {"a1_line_sum_symmetric", r.a1_line_sum_symmetric},
            {"a1_pf_eigenpair", r.a1_pf_eigenpair},
            {"a2_positive", r.a2_positive},
            {"a2_normal", r.a2_normal},
            {"a2_pf_one", r.a2_pf_one},
            {"a3_right_half_plane", r.a3_right_half_plane}};
}

std::string report_text(const AssumptionReport& r) {
    Record rec;
    for (const auto& [name, c] : items(r)) {
        rec.set(name, std::string(to_string(c.verdict)));
        rec.set(name + ".evidence", c.evidence);
    }
    rec.set("a1", r.a1() ? "holds" : "fails");
    rec.set("a2", r.a2() ? "holds" : "fails");
    rec.set("a3", r.a3() ? "holds" : "fails");
    rec.set("all_exact", r.all_exact());
    return rec.text();
}

std::string wake_text(const FrontResult& f) {
    Record rec;
    rec.set("verdict", to_string(f.wake.verdict));
    rec.set("sup_deviation", f.wake.sup_deviation);
    rec.set("oscillation_amplitude", f.wake.oscillation_amplitude);
    rec.set("window_lo", f.wake.window_lo);
    rec.set("window_hi", f.wake.window_hi);
    rec.set("station", f.wake.station);
    for (std::size_t i = 0; i < f.wake.wake_mean.size(); ++i) rec.set("wake_mean_" + std::to_string(i + 1), f.wake.wake_mean[i]);
    rec.set("wake_spread", f.wake.wake_spread);
    rec.set("measured_speed", f.measured_speed);
    rec.set("frame_shift", f.frame_shift);
    rec.set("dt", f.dt);
    return rec.text();
}

std::string front_csv(const FrontResult& f) {
    std::string s = "t,position,station_total\n";
    for (std::size_t k = 0; k < f.times.size(); ++k)
        s += fmt(f.times[k]) + "," + fmt(f.positions[k]) + "," + fmt(f.station_totals[k]) + "\n";
    return s;
}

struct Run {
    std::string command;
    fs::path config_path;
    std::string config_bytes;
    Json cfg;
    std::optional<std::uint64_t> seed;
    double tol = 1e-10;
    fs::path out_dir;
    Record manifest;
    std::ostream* out = nullptr;

    void write(const std::string& name, const std::string& body) const {
        fs::create_directories(out_dir);
        std::ofstream f(out_dir / name, std::ios::binary | std::ios::trunc);
        f << body;
        if (!f) throw fs::filesystem_error("cannot write", out_dir / name, std::make_error_code(std::errc::io_error));
    }

    std::uint64_t need_seed() const {
        if (!seed) throw MalformedInput(command + " is stochastic and needs a seed (--seed or \"seed\" in the config)");
        return *seed;
    }

    LoadedSystem system() {
        if (!cfg.contains("system")) throw MalformedInput("config: missing 'system'");
        LoadedSystem sys = parse_system(cfg.at("system"), seed, config_path.parent_path());
        manifest.set("system_source", sys.source);
        manifest.set("n", sys.spec.n());
        return sys;
    }

    AssumptionReport verdicts(const SystemSpec& spec) {
        AssumptionReport r = check_assumptions(spec, tol);
        manifest.set("a1", r.a1() ? "holds" : "fails");
        manifest.set("a2", r.a2() ? "holds" : "fails");
        manifest.set("a3", r.a3() ? "holds" : "fails");
        return r;
    }

    int fail_assumptions(const std::string& failed) {
        manifest.set("reason", "assumption-failure");
        manifest.set("failed_items", failed);
        return exit_assumption_failure;
    }
};

std::string failed_items(const AssumptionReport& r, const std::vector<std::string>& groups) {
    std::string s;
    for (const auto& [name, c] : items(r))
        for (const auto& g : groups)
            if (!c.ok() && name.starts_with(g + "_")) s += (s.empty() ? "" : ";") + name;
    return s;
}

int cmd_check(Run& run) {
    const Json sec = section(run.cfg, "check");
    std::vector<std::string> groups{"a1", "a2", "a3"};
    if (sec.contains("require")) {
        groups.clear();
        if (!sec.at("require").is_array()) throw MalformedInput("config: 'require' must be a list of a1, a2, a3");
        for (const auto& g : sec.at("require")) {
            if (g != "a1" && g != "a2" && g != "a3") throw MalformedInput("config: 'require' must be a list of a1, a2, a3");
            groups.push_back(g.get<std::string>());
        }
    }
    const LoadedSystem sys = run.system();
    const AssumptionReport r = run.verdicts(sys.spec);
    run.write("assumptions.txt", report_text(r));
    run.write("system.json", system_to_json(sys.spec).dump(2) + "\n");
    const std::string failed = failed_items(r, groups);
    return failed.empty() ? exit_ok : run.fail_assumptions(failed);
}

int cmd_equilibria(Run& run) {
    const Json sec = section(run.cfg, "equilibria");
    const std::uint64_t seed = run.need_seed();
    const LoadedSystem sys = run.system();
    run.verdicts(sys.spec);
    const int starts = count(sec, "n_starts", 64);
    const EquilibriumSet set = find_all_equilibria(sys.spec, starts, seed, num(sec, "tol", 1e-10));
    std::ostringstream csv;
    write_equilibria_csv(csv, set.positive);
    run.write("equilibria.csv", csv.str());
    std::ostringstream boundary;
    write_equilibria_csv(boundary, set.boundary);
    run.write("boundary_equilibria.csv", boundary.str());
    run.manifest.set("n_starts", starts);
    run.manifest.set("converged_starts", set.converged);
    run.manifest.set("n_positive", set.positive.size());
    run.manifest.set("n_boundary", set.boundary.size());
    return exit_ok;
}

int cmd_bifurcate(Run& run) {
    const Json sec = section(run.cfg, "bifurcate");
    const std::uint64_t seed = run.need_seed();
    const double gamma = required_num(sec, "gamma");
    const double lo = num(sec, "sigma_lo", 0.05), hi = num(sec, "sigma_hi", 1.0);
    const int samples = count(sec, "n_samples", 20, 2);
    const BifurcationDiagram d = bifurcation_scan_n2(gamma, lo, hi, samples, seed, count(sec, "n_starts", 64),
                                                     num(sec, "threshold_tol", 1e-10));
    std::string th = "sigma\n";
    for (double s : d.detected_thresholds) th += fmt(s) + "\n";
    run.write("thresholds.csv", th);
    std::string diag = "sigma,max_real_at_one,n_positive,n_stable\n";
    for (std::size_t k = 0; k < d.parameter_samples.size(); ++k) {
        std::size_t stable = 0;
        for (const auto& e : d.branches[k]) stable += e.stable ? 1 : 0;
        diag += fmt(d.parameter_samples[k]) + "," + fmt(d.max_real_at_one[k]) + "," +
                std::to_string(d.branches[k].size()) + "," + std::to_string(stable) + "\n";
    }
    run.write("diagram.csv", diag);
    run.manifest.set("gamma", gamma);
    run.manifest.set("n_thresholds", d.detected_thresholds.size());
    run.manifest.set("n_count_changes", d.count_changes.size());
    return exit_ok;
}

int simulate_front(Run& run, const SystemSpec& spec, const Json& sec) {
    const FrontOptions opt = front_options(sec, {});
    const FrontResult f = front_experiment(spec, opt);
    run.write("front.csv", front_csv(f));
    run.write("wake.txt", wake_text(f));
    std::ostringstream snaps;
    write_snapshots_csv(snaps, f.snapshots);
    run.write("snapshots.csv", snaps.str());
    run.manifest.set("scheme", to_string(opt.scheme));
    run.manifest.set("dt", f.dt);
    run.manifest.set("dx", opt.dx);
    run.manifest.set("wake_verdict", to_string(f.wake.verdict));
    run.manifest.set("sup_deviation", f.wake.sup_deviation);
    run.manifest.set("measured_speed", f.measured_speed);
    return exit_ok;
}

int simulate_field(Run& run, const SystemSpec& spec, const Json& sec) {
    const double x_min = num(sec, "x_min", 0.0), x_max = num(sec, "x_max", 100.0), dx = num(sec, "dx", 0.25);
    if (!(x_max > x_min && dx > 0.0)) throw MalformedInput("config: need x_max > x_min and dx > 0");
    const auto n = static_cast<std::size_t>(std::llround((x_max - x_min) / dx)) + 1;
    const SpatialGrid grid(x_min, x_min + dx * static_cast<double>(n - 1), n);

    const Json init = section(sec, "initial");
    Vector level = numbers(init, "level");
    if (level.empty()) level.assign(spec.n(), 1.0);
    if (level.size() != spec.n()) throw MalformedInput("config: 'level' needs one value per component");
    FieldState u0 = uniform_state(grid, level);
    const Json bump = section(init, "bump");
    const double amp = num(bump, "amplitude", 0.0), centre = num(bump, "center", 0.5 * (x_min + x_max)),
                 width = num(bump, "width", 1.0);
    for (std::size_t i = 0; i < spec.n(); ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double z = (grid.x(j) - centre) / width;
            u0.values(i, j) += amp * std::exp(-z * z);
        }

    SimulateOptions opt;
    opt.t_end = num(sec, "t_end", 10.0);
    opt.dt = num(sec, "dt", 0.0);
    opt.scheme = scheme_of(sec);
    opt.snapshot_times = numbers(sec, "snapshot_times");
    double sup = 0.0;
    for (double v : u0.values.data()) sup = std::max(sup, v);
    const double bound = max_stable_dt(spec, grid, opt.scheme, sup);
    double dt = opt.dt > 0.0 ? opt.dt : std::min(0.05, 0.9 * bound);
    if (opt.t_end > 0.0) dt = opt.t_end / std::ceil(opt.t_end / dt - 1e-9);

    const auto states = simulate(spec, std::move(u0), opt);
    std::ostringstream snaps;
    write_snapshots_csv(snaps, states);
    run.write("snapshots.csv", snaps.str());
    if (std::all_of(states.begin(), states.end(), [](const FieldState& s) { return s.positive(); })) {
        std::string lyap = "t,lyapunov\n";
        for (const auto& s : states) lyap += fmt(s.t) + "," + fmt(parabolic_lyapunov(s)) + "\n";
        run.write("lyapunov.csv", lyap);
    }
    run.manifest.set("scheme", to_string(opt.scheme));
    run.manifest.set("dt", dt);
    run.manifest.set("dx", grid.dx());
    return exit_ok;
}

int cmd_simulate(Run& run) {
    const Json sec = section(run.cfg, "simulate");
    const std::string mode = text(sec, "mode", "front");
    if (mode != "front" && mode != "field") throw MalformedInput("config: simulate mode must be front or field");
    const LoadedSystem sys = run.system();
    run.verdicts(sys.spec);
    run.manifest.set("mode", mode);
    return mode == "front" ? simulate_front(run, sys.spec, sec) : simulate_field(run, sys.spec, sec);
}

int cmd_wave(Run& run) {
    const Json sec = section(run.cfg, "wave");
    if (sec.contains("c") == sec.contains("c_offset")) throw MalformedInput("config: wave needs exactly one of c, c_offset");
    const LoadedSystem sys = run.system();
    const AssumptionReport r = run.verdicts(sys.spec);
    if (!r.a1()) return run.fail_assumptions(failed_items(r, {"a1"}));

    const double c_star = minimal_speed(sys.spec);
    const double c = sec.contains("c") ? num(sec, "c", 0.0) : c_star + num(sec, "c_offset", 0.0);
    const double R = num(sec, "R", 100.0);
    const int points = count(sec, "n_points", static_cast<int>(std::llround(10.0 * R)) + 1, 5);
    WaveOptions opt;
    opt.delta = num(sec, "delta", opt.delta);
    if (sec.contains("right_level")) opt.right_level = num(sec, "right_level", 0.0);
    opt.tol = num(sec, "tol", opt.tol);
    opt.max_iter = count(sec, "max_iter", opt.max_iter);

    const WaveProfile w = solve_wave_profile(sys.spec, c, R, static_cast<std::size_t>(points), opt);
    Record rec;
    for (const auto& [k, v] : profile_record(w)) rec.set(k, v);
    rec.set("c_star", c_star);
    run.write("profile.txt", rec.text());
    run.manifest.set("c", c);
    run.manifest.set("c_star", c_star);
    run.manifest.set("dx", w.grid.dx());
    run.manifest.set("residual", w.residual);
    if (!w.converged) {
        run.manifest.set("reason", w.reason);
        return exit_divergence;
    }
    std::ostringstream csv;
    write_profile_csv(csv, w);
    run.write("profile.csv", csv.str());
    if (w.min_value > 0.0) {
        std::string e = "R,lhs,rhs,slack,bracket_left,bracket_right,wake_bracket\n";
        for (const auto& l : energy_sweep(w))
            e += fmt(l.R) + "," + fmt(l.lhs) + "," + fmt(l.rhs) + "," + fmt(l.slack) + "," + fmt(l.bracket_left) + "," +
                 fmt(l.bracket_right) + "," + fmt(l.wake_bracket) + "\n";
        run.write("energy.csv", e);
    }
    return exit_ok;
}

int cmd_continuum(Run& run) {
    if (!run.cfg.contains("continuum") || !run.cfg.at("continuum").is_object())
        throw MalformedInput("config: missing 'continuum' object");
    const Json sec = run.cfg.at("continuum");
    const ContinuumSpec cs = parse_continuum(sec, run.config_path.parent_path());
    const int bins = count(sec, "n_bins", 32, 3);
    const DiscretizedSystem sys = discretize(cs, static_cast<std::size_t>(bins), flag(sec, "normalize", false), run.tol);
    run.manifest.set("system_source", "continuum");
    run.manifest.set("n", sys.spec.n());
    run.manifest.set("n_bins", bins);
    run.write("assumptions.txt", report_text(sys.report));
    run.write("system.json", system_to_json(sys.spec).dump(2) + "\n");
    run.manifest.set("a1", sys.report.a1() ? "holds" : "fails");
    run.manifest.set("a2", sys.report.a2() ? "holds" : "fails");
    run.manifest.set("a3", sys.report.a3() ? "holds" : "fails");
    run.manifest.set("all_exact", sys.report.all_exact());
    run.manifest.set("adjoint_mismatch", check_adjoint_identity(cs, sys.mesh, run.tol).mismatch);
    if (!sys.report.a1() || !sys.report.a2()) return run.fail_assumptions(failed_items(sys.report, {"a1", "a2"}));

    if (flag(sec, "stationary", true)) {
        const std::uint64_t seed = run.need_seed();
        const EquilibriumSet set = find_all_equilibria(sys.spec, count(sec, "n_starts", 64), seed);
        std::ostringstream csv;
        write_equilibria_csv(csv, set.positive);
        run.write("stationary.csv", csv.str());
        run.manifest.set("n_stationary", set.positive.size());
    }

    FrontOptions defaults;
    defaults.dx = 0.5;
    const FrontOptions opt = front_options(section(sec, "front"), defaults);
    const FrontResult f = front_experiment(sys.spec, opt);
    run.write("front.csv", front_csv(f));
    run.write("wake.txt", wake_text(f));
    run.manifest.set("scheme", to_string(opt.scheme));
    run.manifest.set("dt", f.dt);
    run.manifest.set("dx", opt.dx);
    run.manifest.set("c_star", minimal_speed(sys.spec));
    run.manifest.set("measured_speed", f.measured_speed);
    run.manifest.set("wake_verdict", to_string(f.wake.verdict));
    run.manifest.set("sup_deviation", f.wake.sup_deviation);
    return exit_ok;
}

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void load_config(Run& run) {
    std::ifstream in(run.config_path, std::ios::binary);
    if (!in) throw MalformedInput("cannot open config " + run.config_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    run.config_bytes = ss.str();
    run.manifest.set("config_hash", hex(fnv1a(run.config_bytes)));
    try {
        run.cfg = Json::parse(run.config_bytes);
    } catch (const Json::parse_error& e) {
        throw MalformedInput(run.config_path.string() + ": " + e.what());
    }
    if (!run.cfg.is_object()) throw MalformedInput("config must be a JSON object");
    if (!run.seed && run.cfg.contains("seed")) {
        if (!run.cfg.at("seed").is_number_unsigned()) throw MalformedInput("config: 'seed' must be a nonnegative integer");
        run.seed = run.cfg.at("seed").get<std::uint64_t>();
    }
    run.manifest.set("seed", run.seed ? std::to_string(*run.seed) : "none");
    run.manifest.set("tol", run.tol);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Batch front-end for the KPP system lab", "kppctl"};
    app.set_version_flag("--version", std::string(kppctl_version));
    app.require_subcommand(1, 1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    double tol = 1e-10;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"check", "assumption report for a system"},
        {"equilibria", "all constant positive states (multistart Newton)"},
        {"bifurcate", "stability threshold scan of the two-component family"},
        {"simulate", "time integration: a front experiment or a free field"},
        {"wave", "travelling-wave profile and its energy ledger"},
        {"continuum", "discretized trait model: verdicts, stationary states, front"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON config file")->required();
        sub->add_option("--seed", seed, "seed for stochastic steps (overrides the config)");
        sub->add_option("--out", out_dir, std::string("output directory (else $") + out_dir_env + ", the config's \"out\", ./kppctl_out)");
        sub->add_option("--tol", tol, "tolerance for assumption checks")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    Run run;
    run.out = &out;
    run.command = app.get_subcommands().front()->get_name();
    run.config_path = config;
    run.seed = seed;
    run.tol = tol;
    run.manifest.set("command", run.command);
    run.manifest.set("version", std::string(kppctl_version));

    const auto start = std::chrono::steady_clock::now();
    int code = exit_usage;
    std::string reason;
    try {
        try {
            load_config(run);
        } catch (...) {
            // Still decide where the manifest goes.
            const char* env = std::getenv(out_dir_env);
            run.out_dir = !out_dir.empty() ? fs::path(out_dir) : env && *env ? fs::path(env) : fs::path("kppctl_out");
            throw;
        }
        const char* env = std::getenv(out_dir_env);
        run.out_dir = !out_dir.empty()               ? fs::path(out_dir)
                      : env && *env                  ? fs::path(env)
                      : run.cfg.contains("out")      ? fs::path(text(run.cfg, "out", ""))
                                                     : fs::path("kppctl_out");
        if (run.command == "check") code = cmd_check(run);
        else if (run.command == "equilibria") code = cmd_equilibria(run);
        else if (run.command == "bifurcate") code = cmd_bifurcate(run);
        else if (run.command == "simulate") code = cmd_simulate(run);
        else if (run.command == "wave") code = cmd_wave(run);
        else code = cmd_continuum(run);
    } catch (const MalformedInput& e) {
        code = exit_usage, reason = "malformed-input";
        err << "kppctl: " << e.what() << "\n";
    } catch (const Json::exception& e) {
        code = exit_usage, reason = "malformed-input";
        err << "kppctl: " << e.what() << "\n";
    } catch (const DomainTooShort& e) {
        code = exit_divergence, reason = "domain-too-short";
        err << "kppctl: " << e.what() << "\n";
    } catch (const IntegrationError& e) {
        code = exit_divergence, reason = "integration-error";
        err << "kppctl: " << e.what() << "\n";
    } catch (const ConvergenceError& e) {
        code = exit_divergence, reason = "no-convergence";
        err << "kppctl: " << e.what() << "\n";
    } catch (const PreconditionError& e) {
        code = exit_usage, reason = "precondition";
        err << "kppctl: " << e.what() << "\n";
    } catch (const fs::filesystem_error& e) {
        code = exit_usage, reason = "io-error";
        err << "kppctl: " << e.what() << "\n";
    } catch (const std::exception& e) {
        code = exit_divergence, reason = "error";
        err << "kppctl: " << e.what() << "\n";
    }

    static const char* status[] = {"ok", "assumption-failure", "solver-divergence", "usage-error"};
    run.manifest.set("status", status[code]);
    if (!reason.empty()) run.manifest.set("reason", reason);
    else if (code == exit_ok) run.manifest.set("reason", "none");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.manifest.set("wall_time", wall);
    try {
        run.write("manifest.txt", run.manifest.text());
    } catch (const std::exception& e) {
        err << "kppctl: manifest not written: " << e.what() << "\n";
    }
    out << run.manifest.text("wall_time");
    return code;
}

}  // namespace kpp
