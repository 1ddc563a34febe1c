#pragma once

#include "otrack/graph.hpp"
#include "otrack/numerics.hpp"
#include "otrack/plant.hpp"
#include "otrack/scalar_params.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace otrack {

/// Sum of positive parts of the real parts of the leader's eigenvalues.
double lambda0_u(const Matrix& a0);

struct RegulatorSolution {
    Matrix pi;     // ni x n
    Matrix gamma;  // mi x n
    double residual;
};

/// Minimum-norm solution of Pi A0 = A Pi + B Gamma, C Pi = C0, obtained from
/// the stacked vectorized system. Throws (naming the failing eigenvalue)
/// when the rank test of the solvability assumption fails.
RegulatorSolution solve_regulator(const FollowerModel& f, const LeaderModel& l);

struct GareSolution {
    Matrix p;  // symmetric positive definite
    double alpha;
    double residual;
};

struct GareOptions {
    std::optional<Matrix> init;  // flow start, defaults to identity
    double flow_tol = 1e-6;
    double newton_tol = 1e-10;
    int max_flow_steps = 400000;
    double flow_step = 0.02;
};

/// Solves A0 P + P A0' - 2 alpha P C0' (I + C0 P C0')^{-1} C0 P + I = 0 by
/// integrating the matrix Riccati flow and polishing with damped Newton.
/// With alpha = 0 and Hurwitz A0 the equation degenerates to a Lyapunov
/// equation and is solved directly.
GareSolution solve_gare(const LeaderModel& l, double alpha, const GareOptions& opts = {});

struct GainWindow {
    double lower = 0.0;
    double upper = 0.0;
    bool nonempty = false;
    double discriminant = 0.0;

    bool contains(double k) const { return nonempty && lower < k && k < upper; }
};

/// Admissible coupling-gain interval (k_lower, k_upper) of the theorem's
/// construction. sigma_sq = 0 yields the limiting window (alpha/lambda1, inf).
GainWindow gain_window(double lambda1, double sigma_sq, double alpha);

/// Strict inequality sigma^2 * lambda0u < lambda1 / 4.
bool cooperatability(double sigma_sq, double lambda0u, double lambda1);

/// Scalar star-topology dichotomy: mean square output tracking is achievable
/// iff sigma^2 * a0 < 1/2.
bool cooperatability_scalar_star(double sigma_sq, double a0);

/// LQR state feedback with identity weights: K such that A + B K is Hurwitz.
Matrix design_stabilizer(const Matrix& a, const Matrix& b, double margin = 1e-6);

/// Dual design: H such that A - H C is Hurwitz.
Matrix design_observer_gain(const Matrix& a, const Matrix& c, double margin = 1e-6);

struct SynthesisOptions {
    double alpha = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    std::map<int, Matrix> k1_overrides;  // 1-based follower index
    std::map<int, Matrix> h_overrides;
    std::optional<Matrix> g1_override;
    std::optional<Matrix> g2_override;
    double stability_margin = 1e-6;
    GareOptions gare;
};

struct GainSet {
    std::vector<Matrix> k1;  // mi x ni
    std::vector<Matrix> k2;  // mi x n
    std::vector<Matrix> h;   // ni x p
    Matrix g1;               // n x p
    Matrix g2;               // n x p
    GareSolution gare;
    GainWindow window;
    double k1_scalar = 0.0;
    double k2_scalar = 0.0;
    std::vector<RegulatorSolution> regulators;
    std::vector<std::string> warnings;
};

/// Full gain construction: P from the generalized Riccati equation,
/// G1/G2 = k PC0'(I + C0 P C0')^{-1}, per-follower stabilizer and observer
/// gains (designed or overridden, always certified Hurwitz), and
/// K2_i = Gamma_i - K1_i Pi_i. Coupling gains outside a nonempty window, or
/// an empty window, produce warnings rather than failures.
GainSet assemble_gains(const LeaderModel& leader,
                       const std::vector<FollowerModel>& followers,
                       const Topology& topology, const NoiseModel& noise,
                       const std::vector<RegulatorSolution>& regulators,
                       const SynthesisOptions& opts);

/// The additive-noise constant: sum over source j (followers and leader) of
/// Upsilon_j' [I_N kron G' P^{-1} G] Upsilon_j with stacked intensity
/// vectors.
double varpi1(const NoiseModel& noise, const Matrix& g1, const Matrix& g2,
              const Matrix& p, const Topology& topology);

/// Steady-state mean-square output tracking bound
/// 6 rho1^2 lmax(P)^2 varpi1^2 ||P||^2 / rho2^2 * ||C||^2 ||B K2||^2.
double tracking_bound(const FollowerModel& f, const Matrix& k1i, const Matrix& k2i,
                      const GareSolution& gare, double varpi_1);
double tracking_bound(const FollowerModel& f, const GainSet& gains, int follower_index,
                      double varpi_1);

/// Initial second moments feeding the tracking-time bound.
struct InitialMoments {
    double est_err_sq = 0.0;        // E||x_i(0) - xhat_i(0)||^2
    double regulation_err_sq = 0.0; // E||xhat_i(0) - Pi_i x0(0)||^2
};

struct TrackingTimeBound {
    std::vector<double> varpi2;  // per follower
    std::vector<double> t_eps;   // per follower
    double t_eps_max = 0.0;
};

/// Noise-free tracking-time bound. Rejects scenarios with nonzero additive
/// noise (outside the theorem's hypothesis).
TrackingTimeBound tracking_time_bound(const std::vector<FollowerModel>& followers,
                                      const GainSet& gains,
                                      const std::vector<InitialMoments>& initial,
                                      double epsilon, const NoiseModel& noise);

/// Scalar star-topology lower bound on liminf E|y_i - y_0|^2.
double scalar_lower_bound(const ScalarParams& p);

}  // namespace otrack
