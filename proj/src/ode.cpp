// ode.cpp — Dormand-Prince 5(4) with PI step control, and fixed-step RK4

#include "corrfit/ode.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace corrfit::ode {

namespace {

using Vec = Eigen::VectorXcd;

struct Dopri5 {
    // Butcher tableau, Dormand & Prince (1980)
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b* (5th minus embedded 4th order weights)
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600;
    static constexpr double e3 = 500.0 / 1113 - 7571.0 / 16695;
    static constexpr double e4 = 125.0 / 192 - 393.0 / 640;
    static constexpr double e5 = -2187.0 / 6784 + 92097.0 / 339200;
    static constexpr double e6 = 11.0 / 84 - 187.0 / 2100;
    static constexpr double e7 = -1.0 / 40;
};

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = std::abs(err[i]) / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
}

// one segment with smooth rhs
void integrate_adaptive(const Rhs& rhs, Vec& y, double t0, double t1,
                        const OdeSolverConfig& cfg, long& steps_used) {
    using D = Dopri5;
    const double span = t1 - t0;
    if (span <= 0.0) return;
    const Eigen::Index n = y.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

    rhs(t0, y, k1);
    double t = t0;
    // initial step heuristic
    const double d0 = y.norm(), d1 = k1.norm();
    double h = (d1 > 1e-30) ? 0.01 * (cfg.atol + cfg.rtol * d0 + 1e-30) / (cfg.rtol * d1 + 1e-30) : span / 100.0;
    h = std::clamp(h, span * 1e-8, span);
    double err_prev = 1.0;

    while (t < t1) {
        if (++steps_used > cfg.max_steps)
            throw SolverError("ode: step count exceeded");
        if (h < span * 1e-14)
            throw SolverError("ode: step size underflow (tolerance failure)");
        bool last = false;
        if (t + h >= t1) {
            h = t1 - t;
            last = true;
        }

        ytmp = y + h * (D::a21 * k1);
        rhs(t + D::c2 * h, ytmp, k2);
        ytmp = y + h * (D::a31 * k1 + D::a32 * k2);
        rhs(t + D::c3 * h, ytmp, k3);
        ytmp = y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3);
        rhs(t + D::c4 * h, ytmp, k4);
        ytmp = y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
        rhs(t + D::c5 * h, ytmp, k5);
        ytmp = y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
        rhs(t + h, ynew, k7); // FSAL
        err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);

        const double e = error_norm(err, y, ynew, cfg.atol, cfg.rtol);
        if (e <= 1.0) {
            t = last ? t1 : t + h;
            y.swap(ynew);
            k1.swap(k7);
            // PI controller (Hairer-Wanner)
            const double fac = 0.9 * std::pow(std::max(e, 1e-10), -0.7 / 5.0) *
                               std::pow(err_prev, 0.4 / 5.0);
            h *= std::clamp(fac, 0.2, 5.0);
            err_prev = std::max(e, 1e-10);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(e, -1.0 / 5.0));
        }
    }
}

void integrate_rk4(const Rhs& rhs, Vec& y, double t0, double t1,
                   const OdeSolverConfig& cfg, long& steps_used) {
    const double span = t1 - t0;
    if (span <= 0.0) return;
    const double dt_target = cfg.rk4_dt > 0.0 ? cfg.rk4_dt : span / 500.0;
    const long n_steps = std::max<long>(1, static_cast<long>(std::ceil(span / dt_target)));
    const double h = span / static_cast<double>(n_steps);
    const Eigen::Index n = y.size();
    Vec k1(n), k2(n), k3(n), k4(n), ytmp(n);
    for (long s = 0; s < n_steps; ++s) {
        if (++steps_used > cfg.max_steps) throw SolverError("ode: step count exceeded");
        const double t = t0 + s * h;
        rhs(t, y, k1);
        ytmp = y + 0.5 * h * k1;
        rhs(t + 0.5 * h, ytmp, k2);
        ytmp = y + 0.5 * h * k2;
        rhs(t + 0.5 * h, ytmp, k3);
        ytmp = y + h * k3;
        rhs(t + h, ytmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

} // namespace

void integrate(const Rhs& rhs, Eigen::VectorXcd& y, double t0, double t1,
               const OdeSolverConfig& cfg, std::span<const double> breakpoints,
               const Observer& observer) {
    if (t1 < t0) throw std::invalid_argument("ode: t1 < t0");
    std::vector<double> edges;
    edges.reserve(breakpoints.size() + 1);
    for (double b : breakpoints) {
        if (b > t0 && b < t1) {
            if (!edges.empty() && b < edges.back())
                throw std::invalid_argument("ode: breakpoints must be sorted");
            if (edges.empty() || b > edges.back()) edges.push_back(b);
        }
    }
    edges.push_back(t1);

    long steps_used = 0;
    double t = t0;
    for (double te : edges) {
        if (cfg.method == OdeSolverConfig::Method::fixed_rk4)
            integrate_rk4(rhs, y, t, te, cfg, steps_used);
        else
            integrate_adaptive(rhs, y, t, te, cfg, steps_used);
        if (observer) observer(te, y);
        t = te;
    }
}

} // namespace corrfit::ode
