#include "kpp/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include "kpp/format.hpp"

namespace kpp {

TraitMesh TraitMesh::uniform(double lo, double hi, std::size_t n_bins) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw PreconditionError("trait mesh: need theta_lo < theta_hi");
    if (n_bins < 3) throw PreconditionError("trait mesh: need at least 3 bins");
    TraitMesh m;
    m.n_bins = n_bins;
    m.h = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t j = 0; j < n_bins; ++j) m.nodes.push_back(lo + (static_cast<double>(j) + 0.5) * m.h);
    return m;
}

namespace {

double sample(const TraitFunction& f, double y, const char* what) {
    if (!f) throw MalformedInput(std::string("continuum: missing ") + what);
    const double v = f(y);
    if (!std::isfinite(v)) throw MalformedInput(std::string("continuum: non-finite ") + what + " at y=" + fmt(y));
    return v;
}

double sample(const TraitKernel& k, double y, double z, const char* what) {
    if (!k) throw MalformedInput(std::string("continuum: missing ") + what);
    const double v = k(y, z);
    if (!std::isfinite(v))
        throw MalformedInput(std::string("continuum: non-finite ") + what + " at (" + fmt(y) + ", " + fmt(z) + ")");
    return v;
}

// Off-diagonal entries are set; the diagonal becomes minus the row's
// off-diagonal sum, so rows add to zero up to one rounding.
void close_rows(DenseMatrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (j != i) s += a(i, j);
        a(i, i) = -s;
    }
}

DenseMatrix jump_operator(const ContinuumSpec& cs, const TraitMesh& mesh) {
    const std::size_t n = mesh.n_bins;
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double m = sample(cs.m_kernel, mesh.nodes[i], mesh.nodes[j], "mutation kernel");
            if (m < 0.0) throw PreconditionError("continuum: mutation kernel must be nonnegative");
            a(i, j) = mesh.h * m;
        }
    close_rows(a);
    return a;
}

}  // namespace

DiscretizedSystem discretize(const ContinuumSpec& cs, std::size_t n_bins, bool normalize_competition, double tol) {
    const TraitMesh mesh = TraitMesh::uniform(cs.theta_lo, cs.theta_hi, n_bins);
    const std::size_t n = n_bins;
    const double h = mesh.h;

    Vector d(n);
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = sample(cs.d, mesh.nodes[j], "diffusivity");
        if (!(d[j] > 0.0)) throw PreconditionError("continuum: diffusivity must be positive");
    }

    // Zero flux through the two outer faces.
    DenseMatrix div(n, n);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double s = sample(cs.sigma, cs.theta_lo + static_cast<double>(j + 1) * h, "trait diffusivity");
        if (!(s > 0.0)) throw PreconditionError("continuum: trait diffusivity must be positive");
        div(j, j + 1) = s / (h * h);
        div(j + 1, j) = s / (h * h);
    }
    close_rows(div);

    DenseMatrix jump = jump_operator(cs, mesh);
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) m(i, j) = div(i, j) + jump(i, j);
    close_rows(m);

    DenseMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double k = sample(cs.k_kernel, mesh.nodes[i], mesh.nodes[j], "competition kernel");
            if (!(k > 0.0)) throw PreconditionError("continuum: competition kernel must be positive");
            c(i, j) = h * k;
        }
    if (normalize_competition)
        for (std::size_t i = 0; i < n; ++i) {
            const double s = row_sum(c, i);
            for (std::size_t j = 0; j < n; ++j) c(i, j) /= s;
        }

    SystemSpec spec(std::move(d), std::move(m), std::move(c));
    AssumptionReport report = check_assumptions(spec, tol);
    return DiscretizedSystem{mesh, std::move(spec), std::move(div), std::move(jump), report, normalize_competition};
}

ContinuumSpec cane_toads_preset(double theta_lo, double theta_hi, double alpha) {
    if (!(theta_lo >= 0.0 && theta_hi > theta_lo && std::isfinite(theta_hi)))
        throw PreconditionError("cane toads: need 0 <= theta_lo < theta_hi < inf");
    if (theta_lo == 0.0) throw PreconditionError("cane toads: theta_lo = 0 makes d(theta) = theta degenerate");
    if (!(alpha > 0.0)) throw PreconditionError("cane toads: alpha must be positive");
    const double k = 1.0 / (theta_hi - theta_lo);
    ContinuumSpec cs;
    cs.name = "cane-toads";
    cs.theta_lo = theta_lo;
    cs.theta_hi = theta_hi;
    cs.d = [theta_lo](double y) { return std::max(y, theta_lo); };
    cs.sigma = [alpha](double) { return alpha; };
    cs.m_kernel = [](double, double) { return 0.0; };
    cs.k_kernel = [k](double, double) { return k; };
    return cs;
}

TabulatedKernel::TabulatedKernel(Vector ys, Vector zs, DenseMatrix values)
    : ys_(std::move(ys)), zs_(std::move(zs)), values_(std::move(values)) {
    if (ys_.size() < 2 || zs_.size() < 2) throw MalformedInput("tabulated kernel: need at least 2 points per axis");
    if (values_.rows() != ys_.size() || values_.cols() != zs_.size())
        throw MalformedInput("tabulated kernel: value table does not match the axes");
    if (!std::is_sorted(ys_.begin(), ys_.end()) || !std::is_sorted(zs_.begin(), zs_.end()) ||
        std::adjacent_find(ys_.begin(), ys_.end()) != ys_.end() || std::adjacent_find(zs_.begin(), zs_.end()) != zs_.end())
        throw MalformedInput("tabulated kernel: axes must be strictly increasing");
    if (!all_finite(values_)) throw MalformedInput("tabulated kernel: non-finite value");
}

namespace {

// Cell index and fractional position along a sorted axis, clamped.
std::pair<std::size_t, double> locate(const Vector& axis, double x) {
    if (x <= axis.front()) return {0, 0.0};
    if (x >= axis.back()) return {axis.size() - 2, 1.0};
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const auto i = static_cast<std::size_t>(it - axis.begin()) - 1;
    return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

}  // namespace

double TabulatedKernel::operator()(double y, double z) const {
    const auto [i, s] = locate(ys_, y);
    const auto [j, t] = locate(zs_, z);
    return (1 - s) * (1 - t) * values_(i, j) + s * (1 - t) * values_(i + 1, j) + (1 - s) * t * values_(i, j + 1) +
           s * t * values_(i + 1, j + 1);
}

TabulatedKernel read_kernel_csv(std::istream& in) {
    std::map<std::pair<double, double>, double> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double y, z, v;
        if (!(ss >> y >> z >> v)) {
            if (lineno == 1) continue;
            throw MalformedInput("kernel csv: cannot parse line " + std::to_string(lineno));
        }
        std::string rest;
        if (ss >> rest) throw MalformedInput("kernel csv: extra field on line " + std::to_string(lineno));
        if (!table.emplace(std::pair{y, z}, v).second)
            throw MalformedInput("kernel csv: duplicate point on line " + std::to_string(lineno));
    }
    Vector ys, zs;
    for (const auto& [key, v] : table) {
        ys.push_back(key.first);
        zs.push_back(key.second);
    }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::sort(zs.begin(), zs.end());
    zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
    if (table.size() != ys.size() * zs.size()) throw MalformedInput("kernel csv: points do not form a full grid");
    DenseMatrix values(ys.size(), zs.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
        for (std::size_t j = 0; j < zs.size(); ++j) values(i, j) = table.at({ys[i], zs[j]});
    return TabulatedKernel(std::move(ys), std::move(zs), std::move(values));
}

AdjointReport check_adjoint_identity(const ContinuumSpec& cs, const TraitMesh& mesh, double tol) {
    const std::size_t n = mesh.n_bins;
    AdjointReport r;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += mesh.h * sample(cs.m_kernel, mesh.nodes[i], mesh.nodes[j], "mutation kernel");
            col += mesh.h * sample(cs.m_kernel, mesh.nodes[j], mesh.nodes[i], "mutation kernel");
        }
        r.mismatch = std::max(r.mismatch, std::abs(row - col));
        scale = std::max(scale, std::abs(row));
    }
    r.adjoint_identity = r.mismatch <= tol * std::max(1.0, scale);
    r.jump_line_sum_symmetric = check_line_sum_symmetric(jump_operator(cs, mesh), tol);
    return r;
}

double k_quadratic_form(const ContinuumSpec& cs, const TraitMesh& mesh, std::span<const double> q) {
    if (q.size() != mesh.n_bins) throw MalformedInput("k_quadratic_form: vector does not match the mesh");
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            s += sample(cs.k_kernel, mesh.nodes[i], mesh.nodes[j], "competition kernel") * q[i] * q[j];
    return mesh.h * mesh.h * s;
}

ContinuumFrontResult continuum_front_experiment(const ContinuumSpec& cs, std::size_t n_bins, const FrontOptions& opt,
                                                bool normalize_competition) {
    DiscretizedSystem sys = discretize(cs, n_bins, normalize_competition);
    if (!sys.report.a1() || !sys.report.a2())
        throw PreconditionError("continuum_front_experiment: discretized system fails A1 or A2");
    FrontResult front = front_experiment(sys.spec, opt);
    return {std::move(sys), std::move(front)};
}

}  // namespace kpp
