#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace otrack {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using IntVector = Eigen::VectorXi;

/// Eigenvalues sorted by ascending real part; ties broken by ascending
/// imaginary part.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;

    double max_real() const;
    /// Sum of positive parts of the real parts.
    double sum_unstable_real() const;
    bool is_hurwitz(double margin = 0.0) const;
};

Spectrum spectrum(const Matrix& m);

/// Certified bound ||e^{At}||_2 <= rho * exp(-rate * t) for Hurwitz A,
/// built from the Lyapunov solution of A'Q + QA + I = 0:
///   rho  = sqrt(lmax(Q)/lmin(Q)),  rate = 1/(2 lmax(Q)).
struct DecayEnvelope {
    double rho;
    double rate;
};

DecayEnvelope decay_envelope(const Matrix& a);

struct KronTerm {
    Matrix left;
    Matrix right;
};

struct KronSolution {
    Matrix x;
    double residual;
    bool underdetermined;
};

/// Solves sum_k left_k * X * right_k = rhs by vectorization.
/// Square nonsingular systems are solved exactly; wide systems yield the
/// minimum-norm least-squares solution. Inconsistent systems throw with the
/// residual magnitude in the message.
KronSolution kron_solve(const std::vector<KronTerm>& terms, const Matrix& rhs);

/// Solves A X + X A' + Q = 0 (Q symmetric). Throws if the spectra of A and
/// -A' intersect (singular vectorized system).
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Matrix exponential (scaling-and-squaring Pade via Eigen).
Matrix expm(const Matrix& a);

/// Operator 2-norm (largest singular value).
double operator_norm(const Matrix& m);

/// Numerical rank with tolerance max(rows, cols) * eps * sigma_max, the
/// scale factor being overridable.
Eigen::Index numerical_rank(const Eigen::MatrixXcd& m, double tol_scale = 1.0);

/// Symmetry defect ||M - M'||.
double symmetry_defect(const Matrix& m);

std::string format_complex(const std::complex<double>& z);

}  // namespace otrack
