// ode.hpp — Explicit Runge-Kutta integration on complex state vectors

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>

namespace corrfit::ode {

struct OdeSolverConfig {
    double rtol = 1e-8;
    double atol = 1e-10;
    long max_steps = 10'000'000;
    enum class Method { adaptive_rk, fixed_rk4 } method = Method::adaptive_rk;
    double rk4_dt = 0.0; // fixed_rk4 step size (0: 1/500 of each segment)
};

class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using Rhs = std::function<void(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dydt)>;
using Observer = std::function<void(double t, const Eigen::VectorXcd& y)>;

// Integrates y' = rhs(t, y) from t0 to t1 in place. The integration lands
// exactly on every breakpoint in (t0, t1) — used for piecewise-smooth right
// hand sides — and the observer, when given, is called at each breakpoint and
// at t1. Breakpoints must be sorted.
void integrate(const Rhs& rhs, Eigen::VectorXcd& y, double t0, double t1,
               const OdeSolverConfig& cfg = {},
               std::span<const double> breakpoints = {},
               const Observer& observer = nullptr);

} // namespace corrfit::ode

namespace corrfit {
using ode::OdeSolverConfig;
using ode::SolverError;
} // namespace corrfit
