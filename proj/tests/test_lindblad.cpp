// test_lindblad.cpp — ME integration, steady states, exponential action

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "corrfit/lindblad.hpp"
#include "corrfit/scenario.hpp"

using namespace corrfit;

namespace {

ConcreteModel decay_qubit(double gamma) {
    const auto q = ops::make_qubit_ops();
    ConcreteModel m;
    m.H = Operator::Zero(2, 2);
    m.jumps = {std::sqrt(gamma) * q.sigma_minus};
    m.rho0 = ops::fock_state(2, 1);
    return m;
}

ConcreteModel lossy_cavity(double omega, double kappa, int n_trunc) {
    const auto f = ops::make_fock_ops(n_trunc);
    ConcreteModel m;
    m.H = omega * f.number;
    m.jumps = {std::sqrt(kappa) * f.a};
    m.rho0 = ops::fock_state(n_trunc, 0);
    return m;
}

} // namespace

TEST_CASE("evolve_me closed forms") {
    SUBCASE("excited population decays exponentially") {
        const double gamma = 0.8;
        const auto m = decay_qubit(gamma);
        OdeSolverConfig cfg;
        cfg.rtol = 1e-11;
        cfg.atol = 1e-13;
        const double t = 1.0 / gamma; // gamma t = 1
        const auto out = lindblad::evolve_me(m, m.rho0, std::vector<double>{t}, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0](1, 1).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
        CHECK(std::abs(out[0].trace() - Complex(1, 0)) < 1e-10);
    }
    SUBCASE("coherent state amplitude spirals in") {
        const double omega = 2.1, kappa = 0.6;
        auto m = lossy_cavity(omega, kappa, 20);
        const Complex alpha0(1.1, 0.0);
        m.rho0 = ops::coherent_state(20, alpha0);
        const auto f = ops::make_fock_ops(20);
        OdeSolverConfig cfg;
        cfg.rtol = 1e-10;
        cfg.atol = 1e-12;
        const std::vector<double> times{0.35, 0.9};
        const auto out = lindblad::evolve_me(m, m.rho0, times, cfg);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const Complex expect = alpha0 * std::exp(-kappa / 2 * times[i]) *
                                   std::exp(Complex(0, -omega * times[i]));
            CHECK(std::abs(ops::expect(f.a, out[i]) - expect) < 1e-8);
        }
    }
    SUBCASE("zero generator keeps the state") {
        ConcreteModel m;
        m.H = Operator::Zero(3, 3);
        m.rho0 = ops::fock_state(3, 1);
        const auto out = lindblad::evolve_me(m, m.rho0, std::vector<double>{2.5});
        CHECK((out[0] - m.rho0).norm() < 1e-12);
    }
    SUBCASE("fixed-step RK4 agrees with the adaptive path") {
        const auto m = decay_qubit(1.0);
        OdeSolverConfig rk4;
        rk4.method = OdeSolverConfig::Method::fixed_rk4;
        rk4.rk4_dt = 1e-3;
        const auto a = lindblad::evolve_me(m, m.rho0, std::vector<double>{1.0}, rk4);
        const auto b = lindblad::evolve_me(m, m.rho0, std::vector<double>{1.0});
        CHECK((a[0] - b[0]).norm() < 1e-9);
    }
    SUBCASE("hermiticity and positivity on the paper models") {
        for (const char* name : {"example2", "example3"}) {
            auto sc = scenario::builtin(name);
            if (sc.n_trunc > 16) sc.n_trunc = 16;
            const ConcreteModel m = model::instantiate(
                scenario::family_for(sc, sc.variants[0]), scenario::true_values(sc));
            OdeSolverConfig cfg;
            cfg.rtol = 1e-10;
            cfg.atol = 1e-12;
            const auto out =
                lindblad::evolve_me(m, m.rho0, std::vector<double>{1.0, 3.0, 7.0}, cfg);
            for (const auto& rho : out) {
                CHECK((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
                CHECK(ops::min_eigenvalue(0.5 * (rho + rho.adjoint())) > -1e-8);
                CHECK(std::abs(rho.trace() - Complex(1, 0)) < 1e-8);
            }
        }
    }
}

TEST_CASE("steady state") {
    SUBCASE("pure decay relaxes to the ground state") {
        const auto m = decay_qubit(1.3);
        const Operator ss = lindblad::steady_state(m);
        CHECK((ss - ops::fock_state(2, 0)).norm() < 1e-9);
    }
    SUBCASE("driven anharmonic oscillator: residual and long-time agreement") {
        auto sc = scenario::builtin("example1");
        const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                                   scenario::true_values(sc));
        const Operator ss = m.rho0; // resolved steady state
        model::LiouvillianOp lop(m);
        CHECK(lop.apply(ss).norm() < 1e-9 * lop.norm_scale());
        // long-time integration oracle: t = 50/kappa with kappa = 1/6 internal
        OdeSolverConfig cfg;
        cfg.rtol = 1e-10;
        cfg.atol = 1e-12;
        const auto out =
            lindblad::evolve_me(m, ops::fock_state(m.dim(), 0), std::vector<double>{300.0},
                                cfg);
        CHECK(ops::trace_distance(out[0], ss) < 1e-6);
    }
    SUBCASE("two-photon model steady state is parity symmetric") {
        auto sc = scenario::builtin("example3");
        sc.n_trunc = 14;
        const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                                   scenario::true_values(sc));
        const int d = m.dim();
        Operator U = Operator::Zero(d, d);
        for (int k = 0; k < d; ++k) U(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
        CHECK((U * m.rho0 * U.adjoint() - m.rho0).norm() < 1e-8);
    }
    SUBCASE("degenerate null space is detected") {
        // two dark levels: |0> and |2> are both fixed points
        ConcreteModel m;
        m.H = Operator::Zero(3, 3);
        Operator L = Operator::Zero(3, 3);
        L(0, 1) = 1.0;
        m.jumps = {L};
        m.rho0 = ops::fock_state(3, 0);
        CHECK_THROWS_AS(lindblad::steady_state(m), lindblad::DegenerateSteadyStateError);
    }
    SUBCASE("steady state is a fixed point of evolve_me") {
        auto sc = scenario::builtin("example3");
        sc.n_trunc = 12;
        const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                                   scenario::true_values(sc));
        OdeSolverConfig cfg;
        cfg.rtol = 1e-10;
        cfg.atol = 1e-12;
        const auto out = lindblad::evolve_me(m, m.rho0, std::vector<double>{5.0}, cfg);
        CHECK(ops::trace_distance(out[0], m.rho0) < 1e-8);
    }
}

TEST_CASE("expectation value of the photon number in the example-3 steady state") {
    // two independent routes: the shift-inverted solve and long-time integration
    auto sc = scenario::builtin("example3");
    sc.n_trunc = 16;
    const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                               scenario::true_values(sc));
    const auto f = ops::make_fock_ops(16);
    const double n_solver = ops::expect(f.number, m.rho0).real();
    OdeSolverConfig cfg;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    const auto out =
        lindblad::evolve_me(m, ops::fock_state(16, 0), std::vector<double>{2000.0}, cfg);
    const double n_longtime = ops::expect(f.number, out[0]).real();
    CHECK(n_solver == doctest::Approx(n_longtime).epsilon(1e-5));
}

TEST_CASE("expm action") {
    SUBCASE("dt = 0 keeps the vector") {
        const auto m = decay_qubit(1.0);
        model::LiouvillianOp lop(m);
        const auto map = lindblad::liouvillian_map(lop);
        Eigen::VectorXcd x = lindblad::vec(ops::fock_state(2, 1));
        const Eigen::VectorXcd x0 = x;
        lindblad::expm_action(map, x, 0.0);
        CHECK((x - x0).norm() == 0.0);
    }
    SUBCASE("matches the ODE solver on pure decay") {
        const double gamma = 0.9;
        const auto m = decay_qubit(gamma);
        model::LiouvillianOp lop(m);
        const auto map = lindblad::liouvillian_map(lop);
        Eigen::VectorXcd x = lindblad::vec(ops::fock_state(2, 1));
        lindblad::expm_action(map, x, 1.0 / gamma, 1e-13);
        OdeSolverConfig cfg;
        cfg.rtol = 1e-12;
        cfg.atol = 1e-14;
        const auto ode =
            lindblad::evolve_me(m, ops::fock_state(2, 1), std::vector<double>{1.0 / gamma},
                                cfg);
        CHECK((lindblad::unvec(x, 2) - ode[0]).norm() < 1e-9);
    }
    SUBCASE("matches the dense exponential on small random generators") {
        std::mt19937 gen(11);
        std::normal_distribution<double> dist;
        for (int dim : {3, 8, 17}) {
            Eigen::MatrixXcd A(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) A(i, j) = Complex(dist(gen), dist(gen));
            A /= 2.0;
            const lindblad::LinearMap map{
                dim, [&A](const Eigen::VectorXcd& v, Eigen::VectorXcd& y) { y = A * v; }};
            Eigen::VectorXcd x(dim);
            for (int i = 0; i < dim; ++i) x[i] = Complex(dist(gen), dist(gen));
            Eigen::VectorXcd via_action = x;
            lindblad::expm_action(map, via_action, 1.7, 1e-13);
            const Eigen::VectorXcd dense = lindblad::dense_expm(1.7 * A) * x;
            CHECK((via_action - dense).norm() < 1e-9 * dense.norm());
        }
    }
    SUBCASE("nilpotent one-point generator exponentiates to I + dt G") {
        // two blocks, L = 0: the only coupling is the filter source
        const int d = 3;
        const Eigen::Index n = 2 * d * d;
        Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < d * d; ++i) G(d * d + i, i) = 0.7; // f C block stand-in
        const lindblad::LinearMap map{
            n, [&G](const Eigen::VectorXcd& v, Eigen::VectorXcd& y) { y = G * v; }};
        Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
        x.head(d * d).setRandom();
        Eigen::VectorXcd expect = x + 0.25 * (G * x);
        Eigen::VectorXcd got = x;
        lindblad::expm_action(map, got, 0.25);
        CHECK((got - expect).norm() < 1e-13 * expect.norm());
    }
    SUBCASE("semigroup property") {
        auto sc = scenario::builtin("example2");
        const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                                   scenario::true_values(sc));
        model::LiouvillianOp lop(m);
        const auto map = lindblad::liouvillian_map(lop);
        Eigen::VectorXcd a = lindblad::vec(ops::fock_state(2, 1));
        Eigen::VectorXcd b = a;
        lindblad::expm_action(map, a, 0.8 + 1.9, 1e-13);
        lindblad::expm_action(map, b, 0.8, 1e-13);
        lindblad::expm_action(map, b, 1.9, 1e-13);
        CHECK((a - b).norm() < 1e-9);
    }
}
