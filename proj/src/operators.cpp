// operators.cpp — Standard operator builders and matrix helpers

#include "corrfit/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace corrfit::ops {

Complex expect(const Operator& obs, const Operator& rho) {
    if (obs.rows() != obs.cols() || rho.rows() != rho.cols() ||
        obs.rows() != rho.rows()) {
        throw std::invalid_argument("expect: dimension mismatch");
    }
    // Tr[A B] = sum_ij A_ij B_ji
    return (obs.transpose().cwiseProduct(rho)).sum();
}

FockOps make_fock_ops(int n_trunc) {
    if (n_trunc < 2) {
        throw std::invalid_argument("make_fock_ops: truncation must be at least 2");
    }
    Operator a = Operator::Zero(n_trunc, n_trunc);
    for (int k = 1; k < n_trunc; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return {a, a.adjoint() * a};
}

QubitOps make_qubit_ops() {
    Operator sx(2, 2), sz(2, 2), sm(2, 2);
    sx << 0, 1, 1, 0;
    sz << -1, 0, 0, 1;
    sm << 0, 1, 0, 0;
    return {sx, sz, sm};
}

Operator fock_state(int n_trunc, int n) {
    if (n < 0 || n >= n_trunc) throw std::invalid_argument("fock_state: level out of range");
    Operator rho = Operator::Zero(n_trunc, n_trunc);
    rho(n, n) = 1.0;
    return rho;
}

Operator coherent_state(int n_trunc, Complex alpha) {
    Eigen::VectorXcd psi(n_trunc);
    psi(0) = 1.0;
    for (int n = 1; n < n_trunc; ++n) psi(n) = psi(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    psi /= psi.norm();
    return psi * psi.adjoint();
}

bool is_hermitian(const Operator& a, double tol) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const Operator& hermitian) {
    Eigen::SelfAdjointEigenSolver<Operator> es(hermitian, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double trace_distance(const Operator& a, const Operator& b) {
    Eigen::JacobiSVD<Operator> svd(a - b);
    return 0.5 * svd.singularValues().sum();
}

bool is_density_matrix(const Operator& rho, double herm_tol, double trace_tol,
                       double eig_tol) {
    if (rho.rows() != rho.cols()) return false;
    if (!is_hermitian(rho, herm_tol)) return false;
    if (std::abs(rho.trace() - Complex(1.0, 0.0)) > trace_tol) return false;
    return min_eigenvalue(0.5 * (rho + rho.adjoint())) >= -eig_tol;
}

} // namespace corrfit::ops
