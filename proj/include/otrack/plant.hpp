#pragma once

#include "otrack/graph.hpp"
#include "otrack/numerics.hpp"

#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace otrack {

struct LeaderModel {
    Matrix a0;  // n x n
    Matrix c0;  // p x n

    Eigen::Index state_dim() const { return a0.rows(); }
    Eigen::Index output_dim() const { return c0.rows(); }
};

struct FollowerModel {
    Matrix a;  // ni x ni
    Matrix b;  // ni x mi
    Matrix c;  // p x ni

    Eigen::Index state_dim() const { return a.rows(); }
    Eigen::Index input_dim() const { return b.cols(); }
    Eigen::Index output_dim() const { return c.rows(); }
};

/// Edge key (i, j): follower i listening to j, where j = 0 is the leader.
using Edge = std::pair<int, int>;

/// Additive intensity vectors Upsilon (in R^p) and multiplicative scalars
/// sigma per communication edge. Edges absent from the maps carry zero
/// intensity.
struct NoiseModel {
    std::map<Edge, Vector> additive;
    std::map<Edge, double> multiplicative;

    Vector additive_on(const Edge& e, Eigen::Index p) const;
    double multiplicative_on(const Edge& e) const;
    /// max over all sigma_ij^2 and sigma_i0^2.
    double sigma_sq_max() const;
    bool additive_all_zero() const;
};

struct AssumptionReport {
    std::vector<bool> stabilizable;        // per follower
    std::vector<bool> detectable;          // per follower
    bool leader_observable = false;
    std::vector<bool> regulator_solvable;  // per follower
    /// Human-readable notes on every failed check (PBH eigenvalue etc.).
    std::vector<std::string> diagnostics;

    bool all_ok() const;
};

struct PlantCheckOptions {
    double rank_tol_scale = 1.0;
};

/// Validates dimensions and evaluates the stabilizability / detectability /
/// observability / regulator-solvability assumptions by PBH and rank tests.
AssumptionReport check_assumptions(const LeaderModel& leader,
                                   const std::vector<FollowerModel>& followers,
                                   const PlantCheckOptions& opts = {});

/// Throws unless leader and followers share one output dimension and every
/// follower satisfies p <= m_i.
void validate_dimensions(const LeaderModel& leader,
                         const std::vector<FollowerModel>& followers);

/// PBH test: rank [lambda I - A, B] = n at every eigenvalue of A with
/// nonnegative real part. Failing eigenvalues are appended to `failures`
/// when given. Detectability of (A, C) is the same test on (A', C').
bool pair_stabilizable(const Matrix& a, const Matrix& b, double tol_scale = 1.0,
                       std::vector<std::complex<double>>* failures = nullptr);

}  // namespace otrack
