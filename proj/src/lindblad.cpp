// lindblad.cpp — ME integration, steady-state solver, Krylov expm action

#include "corrfit/lindblad.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace corrfit::lindblad {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

Vec vec(const Operator& rho) {
    return Eigen::Map<const Vec>(rho.data(), rho.size());
}

Operator unvec(const Vec& v, int dim) {
    return Eigen::Map<const Operator>(v.data(), dim, dim);
}

LinearMap liouvillian_map(const model::LiouvillianOp& op) {
    const int d = op.dim();
    return LinearMap{static_cast<Eigen::Index>(d) * d,
                     [&op, d](const Vec& x, Vec& y) {
                         y.resize(x.size());
                         Eigen::Map<const Operator> xm(x.data(), d, d);
                         Eigen::Map<Operator> ym(y.data(), d, d);
                         Operator out(d, d);
                         op.apply(xm, out);
                         ym = out;
                     }};
}

std::vector<Operator> evolve_me(const ConcreteModel& m, const Operator& rho0,
                                std::span<const double> times,
                                const OdeSolverConfig& cfg) {
    if (times.empty()) return {};
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (times[i + 1] <= times[i])
            throw std::invalid_argument("evolve_me: times must be strictly increasing");
    if (times[0] < 0.0) throw std::invalid_argument("evolve_me: times must be nonnegative");
    const int d = m.dim();
    if (rho0.rows() != d || rho0.cols() != d)
        throw std::invalid_argument("evolve_me: initial state dimension mismatch");

    model::LiouvillianOp lop(m);
    Operator deriv(d, d);
    auto rhs = [&](double, const Vec& y, Vec& dydt) {
        dydt.resize(y.size());
        Eigen::Map<const Operator> ym(y.data(), d, d);
        lop.apply(ym, deriv);
        Eigen::Map<Operator>(dydt.data(), d, d) = deriv;
    };

    std::vector<Operator> out;
    out.reserve(times.size());
    Vec y = vec(rho0);
    std::size_t next = 0;
    if (times[0] == 0.0) {
        out.push_back(rho0);
        next = 1;
    }
    if (next >= times.size()) return out;
    std::vector<double> grid(times.begin() + static_cast<long>(next), times.end());
    ode::integrate(rhs, y, 0.0, grid.back(), cfg, grid,
                   [&](double, const Vec& yt) { out.push_back(unvec(yt, d)); });
    return out;
}

Operator resolved_rho0(const ConcreteModel& m) {
    if (m.rho0_kind == ConcreteModel::InitialState::steady && m.rho0.size() == 0)
        return steady_state(m);
    return m.rho0;
}

namespace {

double liouvillian_scale(const Eigen::SparseMatrix<Complex>& A) {
    // max absolute row sum
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(A, k); it; ++it)
            rowsum[it.row()] += std::abs(it.value());
    return std::max(rowsum.maxCoeff(), 1e-30);
}

} // namespace

Operator steady_state(const ConcreteModel& m, double tol, bool check_unique) {
    const int d = m.dim();
    const Eigen::Index N = static_cast<Eigen::Index>(d) * d;
    const Eigen::SparseMatrix<Complex> A = liouvillian_matrix(m);
    const double scale = liouvillian_scale(A);

    // shift-invert: eigenvalues of L nearest the origin dominate (L - sigma)^-1
    const double sigma = 1e-8 * scale;
    Eigen::SparseMatrix<Complex> shifted = A;
    Eigen::SparseMatrix<Complex> eye(N, N);
    eye.setIdentity();
    shifted -= Complex(sigma, 0.0) * eye;
    shifted.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu(shifted);
    if (lu.info() != Eigen::Success)
        throw SolverError("steady_state: factorisation of shifted Liouvillian failed");

    // two-vector subspace iteration; the identity is a good null-vector seed
    Mat X(N, 2);
    {
        Operator seed = Operator::Identity(d, d);
        seed /= seed.trace();
        X.col(0) = vec(seed);
        // deterministic pseudo-random second vector
        for (Eigen::Index i = 0; i < N; ++i) {
            const double a = std::sin(0.7548776662 * static_cast<double>(i + 1));
            const double b = std::cos(0.5698402910 * static_cast<double>(i + 1));
            X(i, 1) = Complex(a, b);
        }
        X.col(1).normalize();
    }

    Complex lam1 = 0.0, lam2 = 0.0;
    Vec v1;
    double resid = std::numeric_limits<double>::infinity();
    const int max_iters = 60;
    for (int it = 0; it < max_iters; ++it) {
        Mat Y(N, 2);
        Y.col(0) = lu.solve(X.col(0));
        Y.col(1) = lu.solve(X.col(1));
        Eigen::HouseholderQR<Mat> qr(Y);
        X = qr.householderQ() * Mat::Identity(N, 2);
        // Rayleigh projection of L on the subspace
        Mat AX(N, 2);
        AX.col(0) = A * X.col(0);
        AX.col(1) = A * X.col(1);
        const Mat C = X.adjoint() * AX;
        Eigen::ComplexEigenSolver<Mat> es(C);
        int i1 = std::abs(es.eigenvalues()[0]) <= std::abs(es.eigenvalues()[1]) ? 0 : 1;
        lam1 = es.eigenvalues()[i1];
        lam2 = es.eigenvalues()[1 - i1];
        v1 = X * es.eigenvectors().col(i1);
        resid = (A * v1 - lam1 * v1).norm() / v1.norm();
        if (resid <= 0.1 * tol * scale && it >= 1) break;
    }
    if (!(resid <= tol * scale))
        throw SolverError("steady_state: subspace iteration did not converge (residual " +
                          std::to_string(resid / scale) + " of scale)");
    if (check_unique && std::abs(lam2) < 1e-10 * scale)
        throw DegenerateSteadyStateError(
            "steady_state: Liouvillian null space is degenerate at tolerance");

    Operator rho = unvec(v1, d);
    rho = 0.5 * (rho + rho.adjoint());
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-10)
        throw SolverError("steady_state: null vector has vanishing trace");
    rho /= tr;
    return rho;
}

Mat dense_expm(const Mat& A) { return A.exp(); }

Mat materialize(const LinearMap& G) {
    Mat M(G.dim, G.dim);
    Vec e = Vec::Zero(G.dim), col(G.dim);
    for (Eigen::Index j = 0; j < G.dim; ++j) {
        e[j] = 1.0;
        G.apply(e, col);
        M.col(j) = col;
        e[j] = 0.0;
    }
    return M;
}

namespace {

// Krylov (Arnoldi) action of exp(dt G) on x. The basis does not depend on dt,
// so the substep size is chosen a posteriori from the small-matrix
// exponential: take the largest tau <= remaining whose m vs m-2 Galerkin
// approximations agree to tolerance.
void expm_action_krylov(const LinearMap& G, Vec& x, double dt, double tol) {
    const Eigen::Index N = G.dim;
    const int m_max = std::min<Eigen::Index>(40, N);
    double remaining = dt;
    int guard = 0;

    while (remaining > 0.0) {
        if (++guard > 10000)
            throw SolverError("expm_action: substepping failed to converge");
        const double beta = x.norm();
        if (beta == 0.0) return;

        Mat V(N, m_max + 1);
        Mat H = Mat::Zero(m_max + 1, m_max);
        V.col(0) = x / beta;
        int m = m_max;
        bool breakdown = false;
        Vec w(N);
        for (int j = 0; j < m_max; ++j) {
            G.apply(V.col(j), w);
            const double wn0 = std::max(w.norm(), 1e-300);
            for (int i = 0; i <= j; ++i) {
                const Complex h = V.col(i).dot(w);
                H(i, j) = h;
                w -= h * V.col(i);
            }
            // one reorthogonalisation pass
            for (int i = 0; i <= j; ++i) {
                const Complex h = V.col(i).dot(w);
                H(i, j) += h;
                w -= h * V.col(i);
            }
            const double hn = w.norm();
            H(j + 1, j) = hn;
            if (hn <= 1e-13 * wn0) {
                m = j + 1;
                breakdown = true; // invariant subspace reached
                break;
            }
            V.col(j + 1) = w / hn;
        }

        double tau = remaining;
        const Mat Hm = H.topLeftCorner(m, m);
        Vec y_m;
        for (int halvings = 0;; ++halvings) {
            if (halvings > 60) throw SolverError("expm_action: step underflow");
            y_m = (tau * Hm).exp().col(0);
            if (breakdown) break; // invariant subspace: result exact for any tau
            const int ms = std::max(1, m - 2);
            const Vec y_s = (tau * Hm.topLeftCorner(ms, ms)).exp().col(0);
            double diff = 0.0;
            for (int i = 0; i < m; ++i) {
                const Complex a = y_m[i];
                const Complex b = i < ms ? y_s[i] : Complex(0, 0);
                diff += std::norm(a - b);
            }
            diff = std::sqrt(diff);
            if (diff <= tol * std::max(y_m.norm(), 1e-300)) break;
            tau *= 0.5;
        }
        x = beta * (V.leftCols(m) * y_m);
        remaining -= tau;
        if (remaining < 1e-15 * dt) remaining = 0.0;
    }
}

} // namespace

void expm_action(const LinearMap& G, Vec& x, double dt, double tol) {
    if (dt < 0.0) throw std::invalid_argument("expm_action: dt must be nonnegative");
    if (dt == 0.0 || x.size() == 0) return;
    if (x.size() != G.dim) throw std::invalid_argument("expm_action: dimension mismatch");
    expm_action_krylov(G, x, dt, tol);
}

} // namespace corrfit::lindblad
