#include "otrack/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace otrack {

double Spectrum::max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& z : eigenvalues) m = std::max(m, z.real());
    return m;
}

double Spectrum::sum_unstable_real() const {
    double s = 0.0;
    for (const auto& z : eigenvalues) s += std::max(z.real(), 0.0);
    return s;
}

bool Spectrum::is_hurwitz(double margin) const {
    return max_real() <= -margin;
}

Spectrum spectrum(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("spectrum: matrix must be square");
    if (!m.allFinite())
        throw std::invalid_argument("spectrum: matrix has non-finite entries");
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("spectrum: eigenvalue iteration did not converge");
    Spectrum s;
    s.eigenvalues.reserve(static_cast<size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        s.eigenvalues.push_back(solver.eigenvalues()(i));
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  if (a.real() != b.real()) return a.real() < b.real();
                  return a.imag() < b.imag();
              });
    return s;
}

KronSolution kron_solve(const std::vector<KronTerm>& terms, const Matrix& rhs) {
    if (terms.empty()) throw std::invalid_argument("kron_solve: no terms");
    const Eigen::Index xr = terms.front().left.cols();
    const Eigen::Index xc = terms.front().right.rows();
    for (const auto& t : terms) {
        if (t.left.rows() != rhs.rows() || t.right.cols() != rhs.cols() ||
            t.left.cols() != xr || t.right.rows() != xc)
            throw std::invalid_argument("kron_solve: inconsistent term dimensions");
    }
    const Eigen::Index m = rhs.size();
    const Eigen::Index n = xr * xc;
    Matrix big = Matrix::Zero(m, n);
    for (const auto& t : terms) {
        // vec(L X R) = (R' kron L) vec(X), column-major vec.
        for (Eigen::Index j = 0; j < t.right.cols(); ++j)
            for (Eigen::Index i = 0; i < t.right.rows(); ++i)
                big.block(j * t.left.rows(), i * t.left.cols(),
                          t.left.rows(), t.left.cols()) += t.right(i, j) * t.left;
    }
    Eigen::Map<const Vector> b(rhs.data(), m);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(big);
    Vector z = cod.solve(b);
    const double residual = (big * z - b).norm();
    const bool under = cod.rank() < n;
    if (residual > 1e-8 * (1.0 + b.norm())) {
        std::ostringstream os;
        os << "kron_solve: inconsistent system, residual " << residual;
        throw std::runtime_error(os.str());
    }
    KronSolution sol;
    sol.x = Eigen::Map<const Matrix>(z.data(), xr, xc);
    sol.residual = residual;
    sol.underdetermined = under;
    return sol;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("solve_lyapunov: A must be square");
    if (q.rows() != a.rows() || q.cols() != a.cols())
        throw std::invalid_argument("solve_lyapunov: Q dimension mismatch");
    if (symmetry_defect(q) > 1e-10 * (1.0 + q.norm()))
        throw std::invalid_argument("solve_lyapunov: Q must be symmetric");
    const Eigen::Index n = a.rows();
    const Matrix eye = Matrix::Identity(n, n);
    KronSolution sol;
    try {
        sol = kron_solve({{a, eye}, {eye, a.transpose()}}, -q);
    } catch (const std::runtime_error&) {
        throw std::runtime_error(
            "solve_lyapunov: singular system (an eigenvalue pair of A sums to zero)");
    }
    Matrix x = 0.5 * (sol.x + sol.x.transpose());
    const double resid = (a * x + x * a.transpose() + q).norm();
    if (resid > 1e-10 * (1.0 + q.norm())) {
        std::ostringstream os;
        os << "solve_lyapunov: residual " << resid << " exceeds tolerance";
        throw std::runtime_error(os.str());
    }
    return x;
}

DecayEnvelope decay_envelope(const Matrix& a) {
    const Spectrum s = spectrum(a);
    if (!s.is_hurwitz()) {
        std::ostringstream os;
        os << "decay_envelope: matrix is not Hurwitz, offending eigenvalue "
           << format_complex(*std::max_element(
                  s.eigenvalues.begin(), s.eigenvalues.end(),
                  [](const auto& x, const auto& y) { return x.real() < y.real(); }));
        throw std::invalid_argument(os.str());
    }
    const Eigen::Index n = a.rows();
    const Matrix q = solve_lyapunov(a.transpose(), Matrix::Identity(n, n));
    Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0.0)
        throw std::runtime_error("decay_envelope: Lyapunov solution not positive definite");
    return DecayEnvelope{std::sqrt(lmax / lmin), 1.0 / (2.0 * lmax)};
}

Matrix expm(const Matrix& a) { return a.exp(); }

double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return m.jacobiSvd().singularValues()(0);
}

Eigen::Index numerical_rank(const Eigen::MatrixXcd& m, double tol_scale) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double tol = tol_scale * static_cast<double>(std::max(m.rows(), m.cols())) *
                       std::numeric_limits<double>::epsilon() * sv(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++r;
    return r;
}

double symmetry_defect(const Matrix& m) {
    return (m - m.transpose()).norm();
}

std::string format_complex(const std::complex<double>& z) {
    std::ostringstream os;
    os << z.real();
    if (z.imag() != 0.0) os << (z.imag() > 0 ? "+" : "") << z.imag() << "i";
    return os.str();
}

}  // namespace otrack
