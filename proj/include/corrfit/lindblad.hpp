// lindblad.hpp — Deterministic evolution: ME integration, steady states, and
// matrix-exponential action for piecewise-constant generators

#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "corrfit/model.hpp"
#include "corrfit/ode.hpp"

namespace corrfit::lindblad {

class DegenerateSteadyStateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// rho(t_i) for a strictly increasing time grid, solving d rho/dt = L(rho).
// No trace renormalisation is applied.
std::vector<Operator> evolve_me(const ConcreteModel& m, const Operator& rho0,
                                std::span<const double> times,
                                const OdeSolverConfig& cfg = {});

// Steady state via shift-inverted subspace iteration on the vectorised
// Liouvillian. Throws DegenerateSteadyStateError when the null space is not
// one-dimensional at tolerance, SolverError on non-convergence.
Operator steady_state(const ConcreteModel& m, double tol = 1e-9,
                      bool check_unique = true);

// m.rho0, resolving a steady-state marker if present
Operator resolved_rho0(const ConcreteModel& m);

// A linear map on stacked complex vectors, given by its action.
struct LinearMap {
    Eigen::Index dim = 0;
    std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)> apply;
};

// x <- exp(dt * G) x without materialising the exponential (Arnoldi/Krylov
// with adaptive substepping; dense path for small dimensions).
void expm_action(const LinearMap& G, Eigen::VectorXcd& x, double dt,
                 double tol = 1e-12);

// dense Pade scaling-and-squaring exponential
Eigen::MatrixXcd dense_expm(const Eigen::MatrixXcd& A);

// materialise a linear map column by column (test/small-dimension use)
Eigen::MatrixXcd materialize(const LinearMap& G);

// vec / unvec with column-major stacking
Eigen::VectorXcd vec(const Operator& rho);
Operator unvec(const Eigen::VectorXcd& v, int dim);

// LinearMap wrapping the Liouvillian of a model (shares the op's buffers;
// one instance per thread)
LinearMap liouvillian_map(const model::LiouvillianOp& op);

} // namespace corrfit::lindblad
