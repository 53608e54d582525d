// operators.hpp — Dense complex operator algebra on truncated Hilbert spaces

#pragma once

#include <Eigen/Dense>
#include <complex>

namespace corrfit {

using Operator = Eigen::MatrixXcd;
using Complex = std::complex<double>;

namespace ops {

inline Operator dag(const Operator& a) { return a.adjoint(); }

inline Operator commutator(const Operator& a, const Operator& b) {
    return a * b - b * a;
}

// Tr[obs * rho]
Complex expect(const Operator& obs, const Operator& rho);

struct FockOps {
    Operator a;      // annihilation, a|k> = sqrt(k)|k-1>
    Operator number; // a†a
};
FockOps make_fock_ops(int n_trunc);

struct QubitOps {
    Operator sigma_x;
    Operator sigma_z; // diag(-1, +1) with basis order (|0>, |1>): +1 on the excited state
    Operator sigma_minus;
};
QubitOps make_qubit_ops();

// |n><n| on an n_trunc-dimensional space
Operator fock_state(int n_trunc, int n);

// truncated coherent state |alpha><alpha|, renormalised after truncation
Operator coherent_state(int n_trunc, Complex alpha);

bool is_hermitian(const Operator& a, double tol = 1e-10);

// smallest eigenvalue of a Hermitian operator
double min_eigenvalue(const Operator& hermitian);

// 1/2 * sum of singular values of (a - b)
double trace_distance(const Operator& a, const Operator& b);

// density-matrix invariants: Hermitian, unit trace, positive semidefinite
bool is_density_matrix(const Operator& rho, double herm_tol = 1e-10,
                       double trace_tol = 1e-10, double eig_tol = 1e-8);

} // namespace ops
} // namespace corrfit
