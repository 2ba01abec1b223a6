#include "kpp/config.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "kpp/generators.hpp"

namespace kpp {

namespace {

[[noreturn]] void bad(const std::string& what) { throw MalformedInput("config: " + what); }

double number(const Json& j, const char* key) {
    if (!j.contains(key)) bad(std::string("missing '") + key + "'");
    if (!j.at(key).is_number()) bad(std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

double number_or(const Json& j, const char* key, double fallback) { return j.contains(key) ? number(j, key) : fallback; }

Vector vector_of(const Json& j, const std::string& what) {
    if (!j.is_array()) bad(what + " must be an array of numbers");
    Vector v;
    for (const auto& x : j) {
        if (!x.is_number()) bad(what + " must be an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

DenseMatrix rows_of(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) bad(what + " must be a non-empty array of rows");
    const std::size_t n = j.size();
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector r = vector_of(j[i], what + " row");
        if (r.size() != n) bad(what + " must be square");
        for (std::size_t k = 0; k < n; ++k) m(i, k) = r[k];
    }
    return m;
}

DenseMatrix matrix_of(const Json& j, const std::string& what) {
    if (j.is_array()) return rows_of(j, what);
    if (!j.is_object() || j.size() != 1) bad(what + " must be rows or a single generator");
    if (j.contains("laplacian")) {
        const auto& g = j.at("laplacian");
        const std::string b = g.value("boundary", "periodic");
        if (b != "periodic" && b != "neumann") bad("laplacian boundary must be periodic or neumann");
        if (!g.contains("sigmas")) bad("laplacian needs 'sigmas'");
        return make_discrete_laplacian(vector_of(g.at("sigmas"), "sigmas"),
                                       b == "periodic" ? Boundary::periodic : Boundary::neumann);
    }
    if (j.contains("circulant")) {
        const auto& g = j.at("circulant");
        if (!g.contains("phi")) bad("circulant needs 'phi'");
        return make_circulant(vector_of(g.at("phi"), "phi"));
    }
    bad("unknown generator for " + what);
}

TraitFunction trait_function(const Json& j, const char* key, double fallback) {
    const double v = number_or(j, key, fallback);
    return [v](double) { return v; };
}

TraitKernel trait_kernel(const Json& j, const char* key, const std::filesystem::path& base) {
    if (!j.contains(key)) bad(std::string("continuum needs '") + key + "'");
    const auto& k = j.at(key);
    if (k.is_number()) {
        const double v = k.get<double>();
        return [v](double, double) { return v; };
    }
    if (k.is_object() && k.contains("csv") && k.at("csv").is_string()) {
        std::filesystem::path p = k.at("csv").get<std::string>();
        if (p.is_relative()) p = base / p;
        std::ifstream in(p);
        if (!in) bad("cannot open kernel file " + p.string());
        auto table = std::make_shared<TabulatedKernel>(read_kernel_csv(in));
        return [table](double y, double z) { return (*table)(y, z); };
    }
    bad(std::string("'") + key + "' must be a number or {\"csv\": path}");
}

}  // namespace

ContinuumSpec parse_continuum(const Json& j, const std::filesystem::path& base) {
    if (!j.is_object()) bad("continuum must be an object");
    if (j.contains("preset")) {
        if (j.at("preset") != "cane_toads") bad("unknown continuum preset");
        return cane_toads_preset(number_or(j, "theta_lo", 1.0), number_or(j, "theta_hi", 2.0),
                                 number_or(j, "alpha", 0.1));
    }
    ContinuumSpec cs;
    cs.name = j.value("name", "tabulated");
    cs.theta_lo = number(j, "theta_lo");
    cs.theta_hi = number(j, "theta_hi");
    cs.d = trait_function(j, "d", 1.0);
    cs.sigma = trait_function(j, "sigma", 1.0);
    cs.m_kernel = trait_kernel(j, "m", base);
    cs.k_kernel = trait_kernel(j, "k", base);
    return cs;
}

LoadedSystem parse_system(const Json& j, std::optional<std::uint64_t> seed, const std::filesystem::path& base) {
    if (!j.is_object()) bad("system must be an object");
    try {
        if (j.contains("n2")) {
            const auto& g = j.at("n2");
            Vector d = g.contains("d") ? vector_of(g.at("d"), "d") : Vector{1.0, 1.0};
            if (d.size() != 2) bad("n2 needs two diffusion rates");
            return {two_component_system(number(g, "gamma"), number(g, "sigma"), d[0], d[1]), "n2", false, {}};
        }
        if (j.contains("random")) {
            if (!seed) bad("a random system needs a seed");
            const auto& g = j.at("random");
            const double n = number(g, "n");
            if (n < 2 || n != std::floor(n)) bad("random n must be an integer >= 2");
            Rng rng(*seed);
            return {random_stable_system(static_cast<std::size_t>(n), rng, g.value("unit_diffusion", false)), "random",
                    true, {}};
        }
        if (j.contains("continuum")) {
            const auto& g = j.at("continuum");
            const double bins = number_or(g, "n_bins", 32);
            if (bins < 3 || bins != std::floor(bins)) bad("n_bins must be an integer >= 3");
            auto sys = discretize(parse_continuum(g, base), static_cast<std::size_t>(bins), g.value("normalize", false));
            SystemSpec spec = sys.spec;
            return {std::move(spec), "continuum", false, std::move(sys)};
        }
        if (!j.contains("M") || !j.contains("C")) bad("system needs M and C (or n2, random, continuum)");
        const bool generated = j.at("M").is_object() || j.at("C").is_object();
        DenseMatrix m = matrix_of(j.at("M"), "M");
        DenseMatrix c = matrix_of(j.at("C"), "C");
        Vector d = j.contains("D") ? vector_of(j.at("D"), "D") : Vector(m.rows(), 1.0);
        if (j.contains("n") && (!j.at("n").is_number_integer() || j.at("n").get<std::size_t>() != m.rows()))
            bad("'n' does not match the matrices");
        return {SystemSpec(std::move(d), std::move(m), std::move(c)), generated ? "generator" : "inline", false, {}};
    } catch (const Json::exception& e) {
        bad(e.what());
    }
}

Json system_to_json(const SystemSpec& spec) {
    auto rows = [](const DenseMatrix& a) {
        Json r = Json::array();
        for (std::size_t i = 0; i < a.rows(); ++i) r.push_back(Vector(a.row(i).begin(), a.row(i).end()));
        return r;
    };
    return Json{{"n", spec.n()}, {"D", spec.d()}, {"M", rows(spec.M())}, {"C", rows(spec.C())}};
}

Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedInput("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw MalformedInput(path.string() + ": " + e.what());
    }
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace kpp
