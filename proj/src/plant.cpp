#include "otrack/plant.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace otrack {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

}  // namespace

// PBH stabilizability: rank [lambda I - A, B] = n at every eigenvalue with
// nonnegative real part (up to the rank tolerance).
bool pair_stabilizable(const Matrix& a, const Matrix& b, double tol_scale,
                       std::vector<std::complex<double>>* failures) {
    const Eigen::Index n = a.rows();
    bool ok = true;
    for (const auto& lam : spectrum(a).eigenvalues) {
        if (lam.real() < -1e-9) continue;
        ComplexMatrix m(n, n + b.cols());
        m.leftCols(n) = lam * ComplexMatrix::Identity(n, n) - a.cast<std::complex<double>>();
        m.rightCols(b.cols()) = b.cast<std::complex<double>>();
        if (numerical_rank(m, tol_scale) < n) {
            ok = false;
            if (failures) failures->push_back(lam);
        }
    }
    return ok;
}

namespace {

bool regulator_rank_ok(const FollowerModel& f, const LeaderModel& l, double tol_scale,
                       std::vector<std::complex<double>>* failures) {
    const Eigen::Index ni = f.state_dim();
    const Eigen::Index mi = f.input_dim();
    const Eigen::Index p = f.output_dim();
    bool ok = true;
    for (const auto& lam : spectrum(l.a0).eigenvalues) {
        ComplexMatrix m = ComplexMatrix::Zero(ni + p, ni + mi);
        m.topLeftCorner(ni, ni) =
            lam * ComplexMatrix::Identity(ni, ni) - f.a.cast<std::complex<double>>();
        m.topRightCorner(ni, mi) = f.b.cast<std::complex<double>>();
        m.bottomLeftCorner(p, ni) = f.c.cast<std::complex<double>>();
        if (numerical_rank(m, tol_scale) < ni + p) {
            ok = false;
            if (failures) failures->push_back(lam);
        }
    }
    return ok;
}

}  // namespace

Vector NoiseModel::additive_on(const Edge& e, Eigen::Index p) const {
    auto it = additive.find(e);
    if (it == additive.end()) return Vector::Zero(p);
    return it->second;
}

double NoiseModel::multiplicative_on(const Edge& e) const {
    auto it = multiplicative.find(e);
    return it == multiplicative.end() ? 0.0 : it->second;
}

double NoiseModel::sigma_sq_max() const {
    double m = 0.0;
    for (const auto& [e, s] : multiplicative) m = std::max(m, s * s);
    return m;
}

bool NoiseModel::additive_all_zero() const {
    for (const auto& [e, v] : additive)
        if (v.norm() != 0.0) return false;
    return true;
}

bool AssumptionReport::all_ok() const {
    auto all = [](const std::vector<bool>& v) {
        return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
    };
    return leader_observable && all(stabilizable) && all(detectable) &&
           all(regulator_solvable);
}

void validate_dimensions(const LeaderModel& leader,
                         const std::vector<FollowerModel>& followers) {
    if (leader.a0.rows() != leader.a0.cols())
        throw std::invalid_argument("leader A0 must be square");
    if (leader.c0.cols() != leader.a0.rows())
        throw std::invalid_argument("leader C0 column count must match A0");
    const Eigen::Index p = leader.output_dim();
    for (size_t i = 0; i < followers.size(); ++i) {
        const auto& f = followers[i];
        std::ostringstream who;
        who << "follower " << i + 1;
        if (f.a.rows() != f.a.cols())
            throw std::invalid_argument(who.str() + ": A must be square");
        if (f.b.rows() != f.a.rows())
            throw std::invalid_argument(who.str() + ": B row count must match A");
        if (f.c.cols() != f.a.rows())
            throw std::invalid_argument(who.str() + ": C column count must match A");
        if (f.output_dim() != p)
            throw std::invalid_argument(who.str() + ": output dimension differs from leader");
        if (p > f.input_dim())
            throw std::invalid_argument(who.str() + ": requires p <= m_i");
    }
}

AssumptionReport check_assumptions(const LeaderModel& leader,
                                   const std::vector<FollowerModel>& followers,
                                   const PlantCheckOptions& opts) {
    validate_dimensions(leader, followers);
    AssumptionReport rep;
    const size_t nf = followers.size();
    rep.stabilizable.resize(nf);
    rep.detectable.resize(nf);
    rep.regulator_solvable.resize(nf);

    // Observability of (A0, C0) through the full observability matrix.
    const Eigen::Index n = leader.state_dim();
    Matrix obs(leader.output_dim() * n, n);
    Matrix block = leader.c0;
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * leader.output_dim(), leader.output_dim()) = block;
        block = block * leader.a0;
    }
    rep.leader_observable =
        numerical_rank(obs.cast<std::complex<double>>(), opts.rank_tol_scale) == n;
    if (!rep.leader_observable)
        rep.diagnostics.push_back("leader (A0, C0) not observable: observability matrix rank deficient");

    for (size_t i = 0; i < nf; ++i) {
        const auto& f = followers[i];
        std::vector<std::complex<double>> bad;
        rep.stabilizable[i] = pair_stabilizable(f.a, f.b, opts.rank_tol_scale, &bad);
        for (const auto& lam : bad) {
            std::ostringstream os;
            os << "follower " << i + 1 << ": (A, B) fails PBH at lambda = "
               << format_complex(lam);
            rep.diagnostics.push_back(os.str());
        }
        bad.clear();
        rep.detectable[i] =
            pair_stabilizable(f.a.transpose(), f.c.transpose(), opts.rank_tol_scale, &bad);
        for (const auto& lam : bad) {
            std::ostringstream os;
            os << "follower " << i + 1 << ": (A, C) fails dual PBH at lambda = "
               << format_complex(lam);
            rep.diagnostics.push_back(os.str());
        }
        bad.clear();
        rep.regulator_solvable[i] = regulator_rank_ok(f, leader, opts.rank_tol_scale, &bad);
        for (const auto& lam : bad) {
            std::ostringstream os;
            os << "follower " << i + 1 << ": regulator rank test fails at lambda = "
               << format_complex(lam);
            rep.diagnostics.push_back(os.str());
        }
    }
    return rep;
}

}  // namespace otrack
