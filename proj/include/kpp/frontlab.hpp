#pragma once

// Fronts and wakes of u_t = D u_xx + Mu + u - u o (Cu) on an interval with
// Neumann ends, traveling-wave profiles, the integrated energy inequality and
// the linear spreading speed.

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpp/spectral.hpp"

namespace kpp {

struct SpatialGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n_points = 3;

    SpatialGrid() = default;
    SpatialGrid(double lo, double hi, std::size_t n);

    double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    double x(std::size_t j) const { return x_min + dx() * static_cast<double>(j); }
    double length() const { return x_max - x_min; }
    /// Nearest node to a coordinate, clamped to the grid.
    std::size_t index_of(double x) const;
};

struct FieldState {
    SpatialGrid grid;
    double t = 0.0;
    DenseMatrix values;  ///< N x n_points

    std::size_t components() const { return values.rows(); }
    bool positive() const;
    bool nonnegative() const;
    /// sum_i u_i at node j.
    double total(std::size_t j) const;
};

/// Every component constant in x.
FieldState uniform_state(const SpatialGrid& grid, std::span<const double> level);

enum class Scheme { imex, rk4 };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

/// Admissible step: rk4 needs dt <= 0.4 dx^2 / max d_i; imex needs
/// dt <= 0.5 / (1 + |M|_inf + N max c_ij sup_u).
double max_stable_dt(const SystemSpec& spec, const SpatialGrid& grid, Scheme scheme, double sup_u);

/// One time step of the method of lines. imex: explicit Euler on the reaction,
/// then backward Euler on each diffusion term (tridiagonal solves).
class Integrator {
public:
    Integrator(const SystemSpec& spec, const SpatialGrid& grid, Scheme scheme, double dt);
    void step(FieldState& u) const;
    double dt() const { return dt_; }

private:
    void reaction(const DenseMatrix& u, DenseMatrix& out) const;
    void diffusion(const DenseMatrix& u, DenseMatrix& out) const;
    void implicit_diffusion(DenseMatrix& u) const;

    SystemSpec spec_;
    SpatialGrid grid_;
    Scheme scheme_;
    double dt_;
    // Thomas sweep coefficients of I - dt d_i L, one row per component.
    DenseMatrix sweep_upper_, sweep_inv_pivot_;
    // First row of C equal to row i; identical rows share one C u evaluation.
    std::vector<std::size_t> c_row_rep_;
    // Scratch reused across steps; an Integrator is not shared between threads.
    mutable DenseMatrix rate_, cu_;
};

struct SimulateOptions {
    double t_end = 1.0;
    double dt = 0.0;  ///< 0 picks min(0.05, 0.9 * stability bound)
    Scheme scheme = Scheme::imex;
    Vector snapshot_times;  ///< copies taken at the first step reaching each time
    std::function<void(const FieldState&)> observer;  ///< called after every step
    bool enforce_dt_bound = true;
};

/// Integrates to t_end. Returns the initial state, the requested snapshots and
/// the final state, in time order. Throws IntegrationError on non-finite
/// values or lost positivity.
std::vector<FieldState> simulate(const SystemSpec& spec, FieldState u0, const SimulateOptions& opt);

/// Trapezoidal sum_i int (u_i - ln u_i) dx on the state's grid.
double parabolic_lyapunov(const FieldState& u);

enum class WakeVerdict { converged, oscillatory, undetermined };
std::string to_string(WakeVerdict v);

struct WakeReport {
    double window_lo = 0.0, window_hi = 0.0;
    double sup_deviation = 0.0;          ///< sup over window and i of |u_i - 1| at t_end
    double oscillation_amplitude = 0.0;  ///< max - min of sum_i u_i at the station, last quarter
    double station = 0.0;               ///< station offset from the left end of the frame
    Vector wake_mean;                    ///< per-component mean over the window
    double wake_spread = 0.0;            ///< sup over window of |u_i - wake_mean_i|
    WakeVerdict verdict = WakeVerdict::undetermined;
};

/// converged iff sup_deviation < 1e-2; oscillatory iff the station amplitude
/// exceeds 1e-2 in both halves of the last quarter; otherwise undetermined.
inline constexpr double wake_threshold = 1e-2;

struct FrontOptions {
    double domain_length = 400.0;
    double dx = 0.25;
    double x0 = 40.0;
    double t_end = 200.0;
    double dt = 0.0;  ///< 0 picks min(0.05, 0.9 * stability bound)
    Scheme scheme = Scheme::imex;
    /// u_1(0, x) is scaled by 1 + perturbation to break permutation symmetry.
    double perturbation = 0.0;
    /// Shift the window with the front (whole cells) instead of failing when
    /// the front nears the right end.
    bool comoving = true;
    double record_interval = 0.25;
    Vector snapshot_times;
};

struct FrontResult {
    std::vector<FieldState> snapshots;
    FieldState final_state;
    WakeReport wake;
    double measured_speed = 0.0;
    Vector times, positions;            ///< X(t) in absolute coordinates
    Vector station_totals;              ///< sum_i u_i at the station, same times
    double frame_shift = 0.0;           ///< total distance the window moved
    double dt = 0.0;                    ///< step actually taken
};

/// Front started from u_i(0, x) = min(1, exp(-(x - x0))) on [0, L]. X(t) is the
/// rightmost point where sum_i u_i = N/2; the speed is the least-squares slope
/// over the last third of [0, t_end]. The wake window is
/// [x_min + L/10, X(t_end) - L/5] and the station sits at x_min + L/4.
/// Throws DomainTooShort if the front comes within L/20 of the right end
/// while `comoving` is off, or if the wake window is empty.
FrontResult front_experiment(const SystemSpec& spec, const FrontOptions& opt = {});

struct WaveProfile {
    SpatialGrid grid;  ///< in xi, [-R, R]
    double speed = 0.0;
    Vector d;          ///< diffusion rates, kept for the energy ledger
    DenseMatrix values;
    double residual = 0.0;  ///< sup over interior nodes of the discretized travelling-wave equation
    bool converged = false;
    std::string reason;     ///< "no-profile" when Newton fails
    int iterations = 0;
    double decay_rate = 0.0;          ///< mu used in the right boundary value
    double right_boundary_norm = 0.0; ///< |p(R)|_inf
    double left_closeness = 0.0;      ///< |p(-R + 5) - 1|_inf
    double min_value = 0.0;           ///< min over all nodes and components
};

struct WaveOptions {
    double delta = 1e-8;
    /// When set, p(R) = right_level * 1 replaces delta exp(-mu R) 1.
    std::optional<double> right_level;
    std::optional<DenseMatrix> initial_guess;
    double tol = 1e-8;
    int max_iter = 200;
};

/// Damped Newton on the central-difference discretization of
/// -D p'' - c p' = Mp + p - p o (Cp) on [-R, R], p(-R) = 1,
/// p(R) = delta exp(-mu R) 1 with mu the slow decay rate at speed c. Unknowns
/// are log p, the equations are divided by p, and the Jacobian is block
/// tridiagonal. Reports divergence with reason "no-profile" instead of throwing.
WaveProfile solve_wave_profile(const SystemSpec& spec, double c, double R, std::size_t n_points,
                               const WaveOptions& opt = {});

/// Treats a snapshot as a profile in x with the given speed (diagnostics only).
WaveProfile profile_from_field(const FieldState& u, const SystemSpec& spec, double c);

struct EnergyLedger {
    double R = 0.0;
    double lhs = 0.0;  ///< sum_i d_i int (p_i'/p_i)^2 over [xi_c - R, xi_c + R]
    /// [B]_{-R}^{R} with B = sum_i d_i p_i'(p_i - 1)/p_i + c (p_i - ln p_i).
    double rhs = 0.0;
    double slack = 0.0;  ///< rhs - lhs
    /// The same bracket with the opposite sign on the c terms, for reference.
    double rhs_opposite_sign = 0.0;
    double bracket_left = 0.0, bracket_right = 0.0;  ///< B at the two ends
    /// |B(xi_c - R) - c N|: distance of the wake-side bracket from its value at p = 1.
    double wake_bracket = 0.0;
};

/// Integrated energy inequality on the window of half-width R_inner centred in
/// the profile grid (rounded to nodes). Throws PreconditionError on nonpositive
/// values.
EnergyLedger energy_estimate(const WaveProfile& profile, double R_inner);

/// Ledgers at R/2, 5R/8, 3R/4, 7R/8, R (R = half the grid length).
std::vector<EnergyLedger> energy_sweep(const WaveProfile& profile);

struct SpeedEstimate {
    double c = 0.0;
    double mu = 0.0;
};

/// c* = min over mu > 0 of lambda_PF(mu^2 D + M + I) / mu by golden-section
/// search in log mu over [1e-3, 1e3]. Throws PreconditionError unless M
/// satisfies A1.
SpeedEstimate linear_spreading_speed(const SystemSpec& spec);
double minimal_speed(const SystemSpec& spec);

/// Rows t, x, u_1..u_N.
void write_snapshots_csv(std::ostream& os, const std::vector<FieldState>& states);
/// Rows xi, p_1..p_N.
void write_profile_csv(std::ostream& os, const WaveProfile& p);
/// Sidecar record {c, residual, R, converged, reason, ...}.
std::map<std::string, std::string> profile_record(const WaveProfile& p);

}  // namespace kpp
