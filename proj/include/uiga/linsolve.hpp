#pragma once

// Jacobi-preconditioned conjugate gradients and condition numbers of the diagonally
// rescaled matrix D^{-1/2} K D^{-1/2}.

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "uiga/common.hpp"

namespace uiga {

struct SolveReport {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0;  ///< final ||r|| / ||b||
};

class SolverError : public Error {
public:
    SolverError(const std::string& msg, std::vector<double> history) : Error(msg), history_(std::move(history)) {}
    [[nodiscard]] const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

/// Preconditioned CG with the inverse diagonal. Relative residual ||r||/||b|| <= tol.
inline SolveReport pcg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, double tol = 1e-12,
                             int max_iter = 0) {
    const int n = static_cast<int>(A.rows());
    if (max_iter <= 0) max_iter = std::max(1000, 10 * n);
    Eigen::VectorXd dinv(n);
    for (int k = 0; k < n; ++k) {
        const double d = A.coeff(k, k);
        if (!(d > 0.0)) throw SolverError("pcg: non-positive diagonal entry", {});
        dinv[k] = 1.0 / d;
    }
    SolveReport rep;
    rep.x = Eigen::VectorXd::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) return rep;
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = dinv.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    std::vector<double> history{1.0};
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd Ap = A * p;
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) {
            throw SolverError("pcg: matrix is not positive definite on the Krylov space", history);
        }
        const double alpha = rz / pAp;
        rep.x += alpha * p;
        r -= alpha * Ap;
        const double rel = r.norm() / bnorm;
        history.push_back(rel);
        if (rel <= tol) {
            rep.iterations = it;
            rep.residual = rel;
            return rep;
        }
        z = dinv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    std::ostringstream msg;
    msg << "pcg: no convergence in " << max_iter << " iterations, relative residual " << history.back();
    throw SolverError(msg.str(), history);
}

struct ConditionEstimate {
    double lambda_min = 0.0, lambda_max = 0.0;  ///< extreme |eigenvalues| of the rescaled matrix
    double kappa = 1.0;
    bool indefinite = false;  ///< negative eigenvalues or diagonal entries present
    bool singular = false;    ///< smallest |eigenvalue| indistinguishable from zero
    std::string method;       ///< "dense" or "lanczos"
};

namespace detail {

/// Symmetric rescaling with |diag|; flags negative diagonal entries.
inline Eigen::SparseMatrix<double> rescale(const Eigen::SparseMatrix<double>& A, bool& negative_diag) {
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXd s(n);
    negative_diag = false;
    for (int k = 0; k < n; ++k) {
        const double d = A.coeff(k, k);
        if (d < 0.0) negative_diag = true;
        if (d == 0.0) throw Error("zero diagonal entry in rescaling");
        s[k] = 1.0 / std::sqrt(std::abs(d));
    }
    Eigen::SparseMatrix<double> B = s.asDiagonal() * A * s.asDiagonal();
    return B;
}

/// Extreme eigenvalues of a symmetric operator by Lanczos with full reorthogonalization.
/// Returns Ritz values sorted ascending once both ends are stable to rel_tol.
inline Eigen::VectorXd lanczos_ritz(const Eigen::SparseMatrix<double>& B, double rel_tol, int max_steps,
                                    unsigned seed = 12345) {
    const int n = static_cast<int>(B.rows());
    max_steps = std::min(max_steps, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd Q(n, max_steps);
    Eigen::VectorXd q(n);
    for (int k = 0; k < n; ++k) q[k] = dist(rng);
    q.normalize();
    std::vector<double> alpha, beta;
    double prev_lo = 0.0, prev_hi = 0.0, prev_abs_min = 0.0;
    Eigen::VectorXd ritz;
    for (int j = 0; j < max_steps; ++j) {
        Q.col(j) = q;
        Eigen::VectorXd w = B * q;
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= a * q;
        if (j > 0) w -= beta.back() * Q.col(j - 1);
        // Two passes of classical Gram-Schmidt against all previous vectors.
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double bnorm = w.norm();

        const int m = j + 1;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int k = 0; k < m; ++k) {
            T(k, k) = alpha[k];
            if (k + 1 < m) T(k, k + 1) = T(k + 1, k) = beta[k];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
        ritz = es.eigenvalues();
        const double lo = ritz[0], hi = ritz[m - 1];
        const double abs_min = ritz.cwiseAbs().minCoeff();
        const bool stable = j >= 10 && std::abs(lo - prev_lo) <= rel_tol * std::abs(hi) &&
                            std::abs(hi - prev_hi) <= rel_tol * std::abs(hi) &&
                            std::abs(abs_min - prev_abs_min) <= rel_tol * abs_min;
        prev_lo = lo;
        prev_hi = hi;
        prev_abs_min = abs_min;
        if (stable || bnorm <= 1e-14 * std::abs(hi)) break;
        beta.push_back(bnorm);
        q = w / bnorm;
    }
    return ritz;
}

}  // namespace detail

/// kappa = max|lambda| / min|lambda| of D^{-1/2} K D^{-1/2}. Dense eigensolve up to
/// dense_limit unknowns, Lanczos (random start vector from `seed`) beyond.
inline ConditionEstimate estimate_condition(const Eigen::SparseMatrix<double>& K, int dense_limit = 4000,
                                            double rel_tol = 1e-6, unsigned seed = 12345) {
    ConditionEstimate c;
    const int n = static_cast<int>(K.rows());
    if (n == 0) throw Error("condition number of an empty matrix");
    bool neg_diag = false;
    const Eigen::SparseMatrix<double> B = detail::rescale(K, neg_diag);
    Eigen::VectorXd ev;
    if (n <= dense_limit) {
        c.method = "dense";
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(B), Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
    } else {
        c.method = "lanczos";
        ev = detail::lanczos_ritz(B, rel_tol, std::min(n, 3000), seed);
    }
    c.indefinite = neg_diag || ev.minCoeff() < 0.0;
    c.lambda_max = ev.cwiseAbs().maxCoeff();
    c.lambda_min = ev.cwiseAbs().minCoeff();
    const double floor = std::numeric_limits<double>::epsilon() * n * c.lambda_max;
    if (c.lambda_min <= floor) {
        c.singular = true;
        c.kappa = std::numeric_limits<double>::infinity();
    } else {
        c.kappa = c.lambda_max / c.lambda_min;
    }
    return c;
}

}  // namespace uiga
