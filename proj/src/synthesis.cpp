#include "otrack/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace otrack {

namespace {

// Right-hand side of the generalized Riccati flow.
Matrix gare_rhs(const Matrix& a0, const Matrix& c0, double alpha, const Matrix& p) {
    const Eigen::Index pdim = c0.rows();
    const Matrix s = (Matrix::Identity(pdim, pdim) + c0 * p * c0.transpose())
                         .llt()
                         .solve(Matrix::Identity(pdim, pdim));
    return a0 * p + p * a0.transpose() -
           2.0 * alpha * p * c0.transpose() * s * c0 * p +
           Matrix::Identity(a0.rows(), a0.rows());
}

// Standard control Riccati residual A'X + XA - XSX + I with S = BB'.
Matrix care_rhs(const Matrix& a, const Matrix& s, const Matrix& x) {
    return a.transpose() * x + x * a - x * s * x +
           Matrix::Identity(a.rows(), a.rows());
}

// Integrates dP/dt = rhs(P) with step-halving RK4 until ||rhs|| < tol.
template <typename Rhs>
Matrix riccati_flow(Matrix p, Rhs rhs, double tol, int max_steps, double h0,
                    const char* what) {
    double h = h0;
    double resid = rhs(p).norm();
    for (int step = 0; step < max_steps; ++step) {
        if (resid < tol) return p;
        const Matrix k1 = rhs(p);
        const Matrix k2 = rhs(p + 0.5 * h * k1);
        const Matrix k3 = rhs(p + 0.5 * h * k2);
        const Matrix k4 = rhs(p + h * k3);
        Matrix cand = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        cand = 0.5 * (cand + cand.transpose()).eval();
        const double cand_resid = cand.allFinite()
                                      ? rhs(cand).norm()
                                      : std::numeric_limits<double>::infinity();
        if (cand_resid <= 1.05 * resid) {
            p = cand;
            resid = cand_resid;
            h = std::min(h * 1.1, 0.5);
        } else {
            h *= 0.5;
            if (h < 1e-10)
                throw std::runtime_error(std::string(what) +
                                         ": flow step collapsed before convergence");
        }
    }
    std::ostringstream os;
    os << what << ": flow did not converge within budget, residual " << resid;
    throw std::runtime_error(os.str());
}

}  // namespace

double lambda0_u(const Matrix& a0) { return spectrum(a0).sum_unstable_real(); }

RegulatorSolution solve_regulator(const FollowerModel& f, const LeaderModel& l) {
    {
        AssumptionReport rep = check_assumptions(l, {f});
        if (!rep.regulator_solvable[0]) {
            std::string msg = "solve_regulator: rank test fails";
            for (const auto& d : rep.diagnostics)
                if (d.find("regulator") != std::string::npos) msg += "; " + d;
            throw std::invalid_argument(msg);
        }
    }
    const Eigen::Index n = l.state_dim();
    const Eigen::Index ni = f.state_dim();
    const Eigen::Index mi = f.input_dim();
    const Eigen::Index p = f.output_dim();

    // Unknown z = [vec Pi; vec Gamma], column-major.
    const Eigen::Index rows = ni * n + p * n;
    const Eigen::Index cols = ni * n + mi * n;
    Matrix big = Matrix::Zero(rows, cols);
    Vector rhs = Vector::Zero(rows);
    const Matrix in = Matrix::Identity(n, n);
    // vec(Pi A0) = (A0' kron I_ni) vec Pi, vec(A Pi) = (I_n kron A) vec Pi.
    for (Eigen::Index bj = 0; bj < n; ++bj) {
        for (Eigen::Index bi = 0; bi < n; ++bi) {
            const double a0t = l.a0(bi, bj);  // (A0')(bj,bi) placed blockwise
            if (a0t != 0.0)
                big.block(bj * ni, bi * ni, ni, ni) +=
                    a0t * Matrix::Identity(ni, ni);
            if (bi == bj) {
                big.block(bj * ni, bi * ni, ni, ni) -= f.a;
                big.block(bj * ni, ni * n + bi * mi, ni, mi) = -f.b;
                big.block(ni * n + bj * p, bi * ni, p, ni) = f.c;
            }
        }
    }
    for (Eigen::Index j = 0; j < n; ++j)
        rhs.segment(ni * n + j * p, p) = l.c0.col(j);

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(big);
    const Vector z = cod.solve(rhs);
    RegulatorSolution sol;
    sol.pi = Eigen::Map<const Matrix>(z.data(), ni, n);
    sol.gamma = Eigen::Map<const Matrix>(z.data() + ni * n, mi, n);
    sol.residual = (sol.pi * l.a0 - f.a * sol.pi - f.b * sol.gamma).norm() +
                   (f.c * sol.pi - l.c0).norm();
    if (sol.residual > 1e-8 * (1.0 + l.a0.norm()))
        throw std::runtime_error("solve_regulator: residual above tolerance");
    return sol;
}

GareSolution solve_gare(const LeaderModel& l, double alpha, const GareOptions& opts) {
    const Eigen::Index n = l.state_dim();
    const double l0u = lambda0_u(l.a0);
    if (alpha < 0.0)
        throw std::invalid_argument("solve_gare: alpha must be nonnegative");
    if (l0u > 1e-12 && alpha < l0u - 1e-12) {
        std::ostringstream os;
        os << "solve_gare: alpha = " << alpha << " below lambda0_u(A0) = " << l0u
           << ", existence not guaranteed";
        throw std::invalid_argument(os.str());
    }

    GareSolution sol;
    sol.alpha = alpha;
    if (alpha == 0.0) {
        // Degenerate Lyapunov branch (A0 Hurwitz since lambda0_u = 0 passed).
        sol.p = solve_lyapunov(l.a0, Matrix::Identity(n, n));
        sol.residual = gare_rhs(l.a0, l.c0, alpha, sol.p).norm();
        return sol;
    }

    auto rhs = [&](const Matrix& p) { return gare_rhs(l.a0, l.c0, alpha, p); };
    Matrix p = opts.init.value_or(Matrix::Identity(n, n));
    p = riccati_flow(p, rhs, opts.flow_tol, opts.max_flow_steps, opts.flow_step,
                     "solve_gare");

    // Damped Newton polish on the algebraic residual.
    const Eigen::Index pd = l.c0.rows();
    for (int it = 0; it < 100; ++it) {
        const Matrix r = rhs(p);
        const double rn = r.norm();
        if (rn < opts.newton_tol) break;
        const Matrix s = (Matrix::Identity(pd, pd) + l.c0 * p * l.c0.transpose())
                             .llt()
                             .solve(Matrix::Identity(pd, pd));
        const Matrix w = l.c0.transpose() * s * l.c0;
        const Matrix ac = l.a0 - 2.0 * alpha * p * w;
        // Frechet derivative: dR[E] = Ac E + E Ac' + 2a PW E WP.
        Matrix frech = Matrix::Zero(n * n, n * n);
        const Matrix eye = Matrix::Identity(n, n);
        const Matrix pw = p * w;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                frech.block(j * n, i * n, n, n) +=
                    (i == j ? 1.0 : 0.0) * ac + ac(j, i) * eye +
                    2.0 * alpha * pw.transpose()(i, j) * pw;
            }
        Eigen::PartialPivLU<Matrix> lu(frech);
        Eigen::Map<const Vector> rv(r.data(), n * n);
        const Vector ev = lu.solve(-rv);
        const Matrix e = Eigen::Map<const Matrix>(ev.data(), n, n);
        double t = 1.0;
        while (t > 1e-6) {
            Matrix cand = p + t * e;
            cand = 0.5 * (cand + cand.transpose()).eval();
            if (cand.allFinite() && rhs(cand).norm() < (1.0 - 0.25 * t) * rn) {
                p = cand;
                break;
            }
            t *= 0.5;
        }
        if (t <= 1e-6)
            throw std::runtime_error("solve_gare: Newton stalled");
    }
    p = 0.5 * (p + p.transpose()).eval();
    sol.p = p;
    sol.residual = rhs(p).norm();
    if (sol.residual > 1e-8)
        throw std::runtime_error("solve_gare: residual above tolerance after Newton");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sol.p);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::runtime_error("solve_gare: solution not positive definite");
    return sol;
}

GainWindow gain_window(double lambda1, double sigma_sq, double alpha) {
    GainWindow w;
    if (sigma_sq == 0.0) {
        w.lower = lambda1 > 0.0 ? alpha / lambda1 : 0.0;
        w.upper = std::numeric_limits<double>::infinity();
        w.nonempty = true;
        w.discriminant = std::numeric_limits<double>::infinity();
        return w;
    }
    w.discriminant = lambda1 * lambda1 - 4.0 * alpha * lambda1 * sigma_sq;
    w.nonempty = w.discriminant > 0.0;
    if (w.nonempty) {
        const double root = std::sqrt(w.discriminant);
        w.lower = (lambda1 - root) / (2.0 * lambda1 * sigma_sq);
        w.upper = (lambda1 + root) / (2.0 * lambda1 * sigma_sq);
    }
    return w;
}

bool cooperatability(double sigma_sq, double lambda0u, double lambda1) {
    return sigma_sq * lambda0u < lambda1 / 4.0;
}

bool cooperatability_scalar_star(double sigma_sq, double a0) {
    return sigma_sq * a0 < 0.5;
}

namespace {

Matrix solve_care(const Matrix& a, const Matrix& s, const char* what) {
    const Eigen::Index n = a.rows();
    auto rhs = [&](const Matrix& x) { return care_rhs(a, s, x); };
    Matrix x = riccati_flow(Matrix::Identity(n, n), rhs, 1e-6, 400000, 0.02, what);
    // Newton-Kleinman polish: (A - SX)' E + E (A - SX) = -R(X).
    for (int it = 0; it < 100; ++it) {
        const Matrix r = rhs(x);
        const double rn = r.norm();
        if (rn < 1e-11) break;
        const Matrix acl = a - s * x;
        Matrix e;
        try {
            e = solve_lyapunov(acl.transpose(), r);
        } catch (const std::runtime_error&) {
            throw std::runtime_error(std::string(what) + ": Newton step singular");
        }
        double t = 1.0;
        while (t > 1e-6) {
            Matrix cand = x + t * e;
            cand = 0.5 * (cand + cand.transpose()).eval();
            if (cand.allFinite() && rhs(cand).norm() < (1.0 - 0.25 * t) * rn) {
                x = cand;
                break;
            }
            t *= 0.5;
        }
        if (t <= 1e-6) break;
    }
    if (rhs(x).norm() > 1e-8)
        throw std::runtime_error(std::string(what) + ": Riccati solve failed");
    return x;
}

}  // namespace

Matrix design_stabilizer(const Matrix& a, const Matrix& b, double margin) {
    std::vector<std::complex<double>> bad;
    if (!pair_stabilizable(a, b, 1.0, &bad)) {
        std::ostringstream os;
        os << "design_stabilizer: (A, B) not stabilizable, PBH fails at lambda = "
           << format_complex(bad.front());
        throw std::invalid_argument(os.str());
    }
    const Matrix x = solve_care(a, b * b.transpose(), "design_stabilizer");
    const Matrix k = -b.transpose() * x;
    const Spectrum sp = spectrum(a + b * k);
    if (!sp.is_hurwitz(margin)) {
        std::ostringstream os;
        os << "design_stabilizer: closed loop not Hurwitz (max Re = " << sp.max_real()
           << "), pair likely not stabilizable";
        throw std::runtime_error(os.str());
    }
    return k;
}

Matrix design_observer_gain(const Matrix& a, const Matrix& c, double margin) {
    std::vector<std::complex<double>> bad;
    if (!pair_stabilizable(a.transpose(), c.transpose(), 1.0, &bad)) {
        std::ostringstream os;
        os << "design_observer_gain: (A, C) not detectable, PBH fails at lambda = "
           << format_complex(bad.front());
        throw std::invalid_argument(os.str());
    }
    const Matrix y = solve_care(a.transpose(), c.transpose() * c, "design_observer_gain");
    const Matrix h = y * c.transpose();
    const Spectrum sp = spectrum(a - h * c);
    if (!sp.is_hurwitz(margin)) {
        std::ostringstream os;
        os << "design_observer_gain: observer not Hurwitz (max Re = " << sp.max_real()
           << "), pair likely not detectable";
        throw std::runtime_error(os.str());
    }
    return h;
}

GainSet assemble_gains(const LeaderModel& leader,
                       const std::vector<FollowerModel>& followers,
                       const Topology& topology, const NoiseModel& noise,
                       const std::vector<RegulatorSolution>& regulators,
                       const SynthesisOptions& opts) {
    validate_dimensions(leader, followers);
    if (regulators.size() != followers.size())
        throw std::invalid_argument("assemble_gains: missing regulator solution");
    const bool g_overridden = opts.g1_override.has_value() && opts.g2_override.has_value();
    if (!g_overridden && (opts.k1 <= 0.0 || opts.k2 <= 0.0))
        throw std::invalid_argument("assemble_gains: k1 and k2 must be positive");

    GainSet gains;
    gains.k1_scalar = opts.k1;
    gains.k2_scalar = opts.k2;
    gains.regulators = regulators;
    gains.gare = solve_gare(leader, opts.alpha, opts.gare);

    const SpectralSummary spectral = spectral_summary(topology);
    gains.window = gain_window(spectral.lambda1, noise.sigma_sq_max(), opts.alpha);
    if (!gains.window.nonempty) {
        std::ostringstream os;
        os << "empty admissible gain window: lambda1^2 - 4 alpha lambda1 sigma^2 = "
           << gains.window.discriminant << " <= 0";
        gains.warnings.push_back(os.str());
    } else {
        for (auto [name, k] : {std::pair<const char*, double>{"k1", opts.k1},
                               {"k2", opts.k2}}) {
            if (!gains.window.contains(k)) {
                std::ostringstream os;
                os << name << " = " << k << " outside the admissible window ("
                   << gains.window.lower << ", " << gains.window.upper << ")";
                gains.warnings.push_back(os.str());
            }
        }
    }

    const Eigen::Index pd = leader.output_dim();
    const Matrix inner = (Matrix::Identity(pd, pd) +
                          leader.c0 * gains.gare.p * leader.c0.transpose())
                             .llt()
                             .solve(Matrix::Identity(pd, pd));
    const Matrix gbase = gains.gare.p * leader.c0.transpose() * inner;
    gains.g1 = opts.g1_override.value_or((opts.k1 * gbase).eval());
    gains.g2 = opts.g2_override.value_or((opts.k2 * gbase).eval());

    for (size_t i = 0; i < followers.size(); ++i) {
        const auto& f = followers[i];
        const int idx = static_cast<int>(i) + 1;
        Matrix k1i;
        if (auto it = opts.k1_overrides.find(idx); it != opts.k1_overrides.end()) {
            k1i = it->second;
            const Spectrum sp = spectrum(f.a + f.b * k1i);
            if (!sp.is_hurwitz(opts.stability_margin)) {
                std::ostringstream os;
                os << "assemble_gains: K1 override for follower " << idx
                   << " is not stabilizing (max Re = " << sp.max_real() << ")";
                throw std::invalid_argument(os.str());
            }
        } else {
            k1i = design_stabilizer(f.a, f.b, opts.stability_margin);
        }
        Matrix hi;
        if (auto it = opts.h_overrides.find(idx); it != opts.h_overrides.end()) {
            hi = it->second;
            const Spectrum sp = spectrum(f.a - hi * f.c);
            if (!sp.is_hurwitz(opts.stability_margin)) {
                std::ostringstream os;
                os << "assemble_gains: H override for follower " << idx
                   << " is not Hurwitz (max Re = " << sp.max_real() << ")";
                throw std::invalid_argument(os.str());
            }
        } else {
            hi = design_observer_gain(f.a, f.c, opts.stability_margin);
        }
        gains.k1.push_back(k1i);
        gains.h.push_back(hi);
        gains.k2.push_back(regulators[i].gamma - k1i * regulators[i].pi);
    }
    return gains;
}

double varpi1(const NoiseModel& noise, const Matrix& g1, const Matrix& g2,
              const Matrix& p, const Topology& topology) {
    const int n_followers = topology.n_followers;
    const Eigen::Index pd = g1.cols();
    const Matrix pinv = p.llt().solve(Matrix::Identity(p.rows(), p.cols()));
    const Matrix m1 = g1.transpose() * pinv * g1;  // p x p
    const Matrix m2 = g2.transpose() * pinv * g2;
    auto block_diag = [&](const Matrix& m) {
        Matrix big = Matrix::Zero(n_followers * pd, n_followers * pd);
        for (int i = 0; i < n_followers; ++i)
            big.block(i * pd, i * pd, pd, pd) = m;
        return big;
    };
    const Matrix big1 = block_diag(m1);
    const Matrix big2 = block_diag(m2);
    double total = 0.0;
    for (int j = 1; j <= n_followers; ++j) {
        Vector stacked = Vector::Zero(n_followers * pd);
        for (int i = 1; i <= n_followers; ++i)
            if (topology.has_edge(i, j))
                stacked.segment((i - 1) * pd, pd) = noise.additive_on({i, j}, pd);
        total += stacked.dot(big1 * stacked);
    }
    Vector stacked0 = Vector::Zero(n_followers * pd);
    for (int i = 1; i <= n_followers; ++i)
        if (topology.has_leader_link(i))
            stacked0.segment((i - 1) * pd, pd) = noise.additive_on({i, 0}, pd);
    total += stacked0.dot(big2 * stacked0);
    return total;
}

double tracking_bound(const FollowerModel& f, const Matrix& k1i, const Matrix& k2i,
                      const GareSolution& gare, double varpi_1) {
    const DecayEnvelope env = decay_envelope(f.a + f.b * k1i);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gare.p);
    const double lmax = es.eigenvalues().maxCoeff();
    const double pnorm = operator_norm(gare.p);
    const double c_norm = operator_norm(f.c);
    const double bk2_norm = operator_norm(f.b * k2i);
    return 6.0 * env.rho * env.rho * lmax * lmax * varpi_1 * varpi_1 * pnorm * pnorm /
           (env.rate * env.rate) * c_norm * c_norm * bk2_norm * bk2_norm;
}

double tracking_bound(const FollowerModel& f, const GainSet& gains, int follower_index,
                      double varpi_1) {
    const size_t i = static_cast<size_t>(follower_index - 1);
    return tracking_bound(f, gains.k1.at(i), gains.k2.at(i), gains.gare, varpi_1);
}

TrackingTimeBound tracking_time_bound(const std::vector<FollowerModel>& followers,
                                      const GainSet& gains,
                                      const std::vector<InitialMoments>& initial,
                                      double epsilon, const NoiseModel& noise) {
    if (!noise.additive_all_zero())
        throw std::invalid_argument(
            "tracking_time_bound: theorem requires zero additive noise");
    if (initial.size() != followers.size())
        throw std::invalid_argument("tracking_time_bound: initial moment count mismatch");
    if (epsilon <= 0.0)
        throw std::invalid_argument("tracking_time_bound: epsilon must be positive");

    Eigen::SelfAdjointEigenSolver<Matrix> es(gains.gare.p);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    const double pnorm = operator_norm(gains.gare.p);

    TrackingTimeBound out;
    for (size_t i = 0; i < followers.size(); ++i) {
        const auto& f = followers[i];
        const DecayEnvelope e1 = decay_envelope(f.a + f.b * gains.k1[i]);
        const DecayEnvelope e3 = decay_envelope(f.a - gains.h[i] * f.c);
        const double c_sq = std::pow(operator_norm(f.c), 2);
        const double bk2_sq = std::pow(operator_norm(f.b * gains.k2[i]), 2);
        const double hc_sq = std::pow(operator_norm(gains.h[i] * f.c), 2);
        const double r1_sq = e1.rho * e1.rho;
        const double r3_sq = e3.rho * e3.rho;
        const double w2 = 2.0 * r3_sq * c_sq * initial[i].est_err_sq +
                          6.0 * r1_sq * c_sq * initial[i].regulation_err_sq +
                          6.0 * r1_sq * c_sq * bk2_sq * (lmax / lmin) *
                              initial[i].est_err_sq +
                          6.0 * r1_sq * r3_sq * c_sq * hc_sq * initial[i].est_err_sq;
        out.varpi2.push_back(w2);
        double t_eps = 0.0;
        if (epsilon < w2) {
            const double rate_sq =
                std::min({e1.rate * e1.rate, e3.rate * e3.rate,
                          1.0 / (4.0 * pnorm * pnorm)});
            const double rate = std::min({e1.rate, e3.rate, 1.0 / (2.0 * pnorm)});
            t_eps = std::max(2.0 / rate_sq, std::log(w2 / epsilon) / (2.0 * rate));
        }
        out.t_eps.push_back(t_eps);
        out.t_eps_max = std::max(out.t_eps_max, t_eps);
    }
    return out;
}

double scalar_lower_bound(const ScalarParams& p) {
    const double leader_rate = p.a0 - p.k * p.c0;
    const double follower_rate = p.ai + p.bi * p.k1i;
    if (leader_rate >= 0.0)
        throw std::invalid_argument("scalar_lower_bound: requires a0 - k c0 < 0");
    if (follower_rate >= 0.0)
        throw std::invalid_argument("scalar_lower_bound: requires ai + bi k1i < 0");
    const double num = p.ci * p.ci * p.bi * p.bi * p.k2i * p.k2i *
                       std::pow(p.k, 4) * p.sigma_i0 * p.sigma_i0 *
                       p.upsilon_i0 * p.upsilon_i0 * p.c0 * p.c0;
    return num / (leader_rate * leader_rate * follower_rate * follower_rate);
}

}  // namespace otrack
