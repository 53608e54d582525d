// test_smesim.cpp — Trajectory stepping, binning, reproducibility, statistics

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corrfit/correlators.hpp"
#include "corrfit/lindblad.hpp"
#include "corrfit/rng.hpp"
#include "corrfit/scenario.hpp"
#include "corrfit/smesim.hpp"

using namespace corrfit;

namespace {

ConcreteModel decay_qubit_jump(double gamma, double eta, double theta, double bin_width,
                               int n_bins) {
    const auto q = ops::make_qubit_ops();
    ConcreteModel m;
    m.H = Operator::Zero(2, 2);
    const Operator L = std::sqrt(gamma) * q.sigma_minus;
    m.jumps = {L};
    DetectorSpec d;
    d.kind = DetectorKind::jump;
    d.L = L;
    d.efficiency = eta;
    d.dark_rate = theta;
    d.bin_width = bin_width;
    d.n_bins = n_bins;
    m.detectors = {d};
    m.detector_channel = {0};
    m.rho0 = ops::fock_state(2, 1);
    return m;
}

ConcreteModel driven_qubit_jump() {
    const auto q = ops::make_qubit_ops();
    ConcreteModel m;
    m.H = 0.5 * q.sigma_z + 0.3 * q.sigma_x;
    const Operator L = std::sqrt(0.4) * q.sigma_minus;
    m.jumps = {L};
    DetectorSpec d;
    d.kind = DetectorKind::jump;
    d.L = L;
    d.efficiency = 0.7;
    d.dark_rate = 0.05;
    d.bin_width = 1.0;
    d.n_bins = 6;
    m.detectors = {d};
    m.detector_channel = {0};
    m.rho0 = ops::fock_state(2, 1);
    return m;
}

ConcreteModel qubit_diffusive() {
    const auto q = ops::make_qubit_ops();
    ConcreteModel m;
    m.H = 0.4 * q.sigma_x;
    const Operator L = std::sqrt(0.6) * q.sigma_minus;
    m.jumps = {L};
    DetectorSpec d;
    d.kind = DetectorKind::diffusive;
    d.L = L;
    d.efficiency = 0.8;
    d.gain = 1.0;
    d.bin_width = 1.0;
    d.n_bins = 6;
    m.detectors = {d};
    m.detector_channel = {0};
    m.rho0 = ops::fock_state(2, 1);
    return m;
}

ConcreteModel vacuum_model(int n_detectors, double gain, double bin_width, int n_bins) {
    ConcreteModel m;
    m.H = Operator::Zero(2, 2);
    DetectorSpec d;
    d.kind = DetectorKind::diffusive;
    d.L = Operator::Zero(2, 2);
    d.efficiency = 1.0;
    d.gain = gain;
    d.bin_width = bin_width;
    d.n_bins = n_bins;
    for (int k = 0; k < n_detectors; ++k) {
        m.jumps.push_back(Operator::Zero(2, 2));
        m.detectors.push_back(d);
        m.detector_channel.push_back(k);
    }
    m.rho0 = ops::fock_state(2, 0);
    return m;
}

} // namespace

TEST_CASE("diffusive single steps") {
    SUBCASE("zero efficiency: dY = dW and a deterministic CPTP Euler step") {
        auto m = qubit_diffusive();
        m.detectors[0].efficiency = 0.0;
        const double dt = 1e-3;
        const Operator rho = ops::coherent_state(2, 0.4);
        const double w = -0.7;
        std::vector<double> dY(1);
        const Operator out = smesim::step_diffusive(m, rho, dt, std::vector<double>{w}, dY);
        CHECK(dY[0] == doctest::Approx(w * std::sqrt(dt)).epsilon(1e-14));
        const Complex i(0, 1);
        const Operator M0 = Operator::Identity(2, 2) -
                            dt * (i * m.H + 0.5 * m.jumps[0].adjoint() * m.jumps[0]);
        Operator expect =
            M0 * rho * M0.adjoint() + dt * m.jumps[0] * rho * m.jumps[0].adjoint();
        expect /= expect.trace();
        CHECK((out - expect).norm() < 1e-13);
    }
    SUBCASE("single-step record mean matches the homodyne signal law") {
        const auto m = qubit_diffusive();
        const double dt = 1e-3;
        const Operator rho = ops::coherent_state(2, Complex(0.5, 0.2));
        const double drift = std::sqrt(0.8) *
                             ops::expect(m.jumps[0] + m.jumps[0].adjoint(), rho).real() * dt;
        const int n = 20000;
        double mean = 0.0;
        std::vector<double> dY(1);
        const rng::CounterRng gen(5, 0);
        for (int k = 0; k < n; ++k) {
            smesim::step_diffusive(m, rho, dt, std::vector<double>{gen.gaussian(k, 0)}, dY);
            mean += dY[0];
        }
        mean /= n;
        const double sem = std::sqrt(dt / n); // Var(dY) ~ dt
        CHECK(std::abs(mean - drift) < 5 * sem);
    }
    SUBCASE("heterodyne quadrature increments are uncorrelated") {
        const auto m = vacuum_model(2, 1.0, 1.0, 2);
        const double dt = 1e-2;
        const Operator rho = ops::fock_state(2, 0);
        const int n = 20000;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        std::vector<double> dY(2);
        const rng::CounterRng gen(6, 0);
        for (int k = 0; k < n; ++k) {
            smesim::step_diffusive(
                m, rho, dt, std::vector<double>{gen.gaussian(k, 0), gen.gaussian(k, 1)}, dY);
            sxy += dY[0] * dY[1];
            sxx += dY[0] * dY[0];
            syy += dY[1] * dY[1];
        }
        const double corr = sxy / std::sqrt(sxx * syy);
        CHECK(std::abs(corr) < 5.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("jump single steps") {
    SUBCASE("dark state never clicks and stays put") {
        const auto m = decay_qubit_jump(1.0, 1.0, 0.0, 1.0, 2);
        const Operator rho = ops::fock_state(2, 0);
        std::vector<double> dN(1);
        for (double u : {0.0001, 0.5, 0.9999}) {
            const Operator out = smesim::step_jump(m, rho, 1e-2, std::vector<double>{u}, dN);
            CHECK(dN[0] == 0.0);
            CHECK((out - rho).norm() < 1e-12);
        }
    }
    SUBCASE("dark counts alone are Poisson and leave the state on the ME path") {
        const double theta = 0.8, gamma = 0.6, T = 4.0;
        const auto m = decay_qubit_jump(gamma, 0.0, theta, 1.0, 4);
        SimConfig cfg;
        cfg.n_exp = 4000;
        cfg.substeps_per_bin = 200;
        cfg.seed = 17;
        cfg.accumulate_mean_state = true;
        const auto batch = smesim::simulate_batch(m, cfg);
        double mean = 0.0, var = 0.0;
        std::vector<double> totals(static_cast<std::size_t>(cfg.n_exp));
        for (long j = 0; j < cfg.n_exp; ++j) {
            double tot = 0.0;
            for (int b = 0; b < 4; ++b) tot += batch.at(j, 0, b);
            totals[static_cast<std::size_t>(j)] = tot;
            mean += tot;
        }
        mean /= static_cast<double>(cfg.n_exp);
        for (double t : totals) var += (t - mean) * (t - mean);
        var /= static_cast<double>(cfg.n_exp - 1);
        const double lam = theta * T;
        const double sem_mean = std::sqrt(lam / cfg.n_exp);
        CHECK(std::abs(mean - lam) < 5 * sem_mean);
        CHECK(std::abs(var - lam) < 5 * lam * std::sqrt(2.0 / cfg.n_exp) + 0.05);
        // with eta = 0 the conditioned state never depends on the record
        const auto me = lindblad::evolve_me(m, m.rho0, std::vector<double>{T});
        CHECK(ops::trace_distance(batch.mean_states.back(), me[0]) < 5e-3);
    }
    SUBCASE("a single emitter produces at most one detected click") {
        const auto m = decay_qubit_jump(0.9, 1.0, 0.0, 1.0, 8);
        SimConfig cfg;
        cfg.n_exp = 300;
        cfg.substeps_per_bin = 100;
        cfg.seed = 23;
        const auto batch = smesim::simulate_batch(m, cfg);
        double total_mean = 0.0;
        for (long j = 0; j < cfg.n_exp; ++j) {
            double tot = 0.0;
            for (int b = 0; b < 8; ++b) tot += batch.at(j, 0, b);
            CHECK(tot <= 1.0);
            total_mean += tot;
        }
        total_mean /= static_cast<double>(cfg.n_exp);
        const double p = 1.0 - std::exp(-0.9 * 8.0);
        CHECK(std::abs(total_mean - p) < 5 * std::sqrt(p * (1 - p) / cfg.n_exp));
    }
    SUBCASE("too large a step is refused") {
        const auto m = decay_qubit_jump(100.0, 1.0, 0.0, 1.0, 2);
        std::vector<double> dN(1);
        CHECK_THROWS_AS(
            smesim::step_jump(m, ops::fock_state(2, 1), 0.01, std::vector<double>{0.5}, dN),
            SolverError);
    }
}

TEST_CASE("batch simulation") {
    SUBCASE("vacuum noise statistics") {
        const double gain = 1.4, dt = 0.7;
        const auto m = vacuum_model(1, gain, dt, 5);
        SimConfig cfg;
        cfg.n_exp = 10000;
        cfg.substeps_per_bin = 50;
        cfg.seed = 31;
        const auto batch = smesim::simulate_batch(m, cfg);
        const double expect_var = gain * gain / dt;
        for (int b = 0; b < 5; ++b) {
            double mean = 0.0, second = 0.0;
            for (long j = 0; j < cfg.n_exp; ++j) {
                const double v = batch.at(j, 0, b);
                mean += v;
                second += v * v;
            }
            mean /= static_cast<double>(cfg.n_exp);
            second /= static_cast<double>(cfg.n_exp);
            const double sem_mean = std::sqrt(expect_var / cfg.n_exp);
            CHECK(std::abs(mean) < 5 * sem_mean);
            const double sem_second = std::sqrt(2.0 * expect_var * expect_var / cfg.n_exp);
            CHECK(std::abs(second - expect_var) < 5 * sem_second);
        }
    }
    SUBCASE("bit-identical reproducibility for any thread count") {
        const auto m = driven_qubit_jump();
        SimConfig cfg;
        cfg.n_exp = 600;
        cfg.substeps_per_bin = 40;
        cfg.seed = 77;
        cfg.threads = 1;
        const auto a = smesim::simulate_batch(m, cfg);
        cfg.threads = 3;
        const auto b = smesim::simulate_batch(m, cfg);
        REQUIRE(a.values.size() == b.values.size());
        bool all_equal = true;
        for (std::size_t i = 0; i < a.values.size(); ++i)
            all_equal = all_equal && a.values[i] == b.values[i];
        CHECK(all_equal);
        cfg.seed = 78;
        const auto c = smesim::simulate_batch(m, cfg);
        bool any_diff = false;
        for (std::size_t i = 0; i < a.values.size(); ++i)
            any_diff = any_diff || a.values[i] != c.values[i];
        CHECK(any_diff);
    }
    SUBCASE("jump records are nonnegative integers") {
        const auto m = driven_qubit_jump();
        SimConfig cfg;
        cfg.n_exp = 500;
        cfg.substeps_per_bin = 60;
        cfg.seed = 5;
        const auto batch = smesim::simulate_batch(m, cfg);
        bool ok = true;
        for (const double v : batch.values) ok = ok && v >= 0.0 && v == std::floor(v);
        CHECK(ok);
    }
}

TEST_CASE("ensemble average matches the master equation") {
    const auto sc = scenario::builtin("example2");
    const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                               scenario::true_values(sc));
    SimConfig cfg;
    cfg.n_exp = 5000;
    cfg.substeps_per_bin = sc.substeps_per_bin;
    cfg.accumulate_mean_state = true;
    cfg.seed = 40;
    const auto batch = smesim::simulate_batch(m, cfg);
    cfg.seed = 41;
    const auto batch2 = smesim::simulate_batch(m, cfg);

    std::vector<double> times;
    for (int b = 1; b <= sc.n_bins; ++b) times.push_back(b);
    const auto me = lindblad::evolve_me(m, m.rho0, times);
    for (int b : {5, 21}) {
        const Operator& avg = batch.mean_states[static_cast<std::size_t>(b)];
        const Operator& avg2 = batch2.mean_states[static_cast<std::size_t>(b)];
        // the spread between two independent ensembles estimates the MC error
        const double sem_proxy = 0.5 * ops::trace_distance(avg, avg2);
        const double dist =
            ops::trace_distance(0.5 * (avg + avg2), me[static_cast<std::size_t>(b - 1)]);
        CHECK(dist < 5.0 * std::max(sem_proxy, 1e-4));
    }
}

TEST_CASE("empirical binned correlations agree with the exact values") {
    auto check_model = [](const ConcreteModel& m, std::uint64_t seed, int substeps) {
        SimConfig cfg;
        cfg.n_exp = 20000;
        cfg.substeps_per_bin = substeps;
        cfg.seed = seed;
        const auto batch = smesim::simulate_batch(m, cfg);
        int n_checked = 0;
        for (int k = 0; k < 4; ++k) {
            double mean = 0.0, var = 0.0;
            for (long j = 0; j < cfg.n_exp; ++j) mean += batch.at(j, 0, k);
            mean /= static_cast<double>(cfg.n_exp);
            for (long j = 0; j < cfg.n_exp; ++j)
                var += (batch.at(j, 0, k) - mean) * (batch.at(j, 0, k) - mean);
            var /= static_cast<double>(cfg.n_exp - 1);
            const double sem = std::sqrt(var / cfg.n_exp);
            const double exact = correlators::binned_correlation(m, {{0, k}}, m.rho0);
            CHECK(std::abs(mean - exact) < 5 * std::max(sem, 1e-12));
            ++n_checked;
        }
        for (int k : {1, 3}) {
            double mean = 0.0, var = 0.0;
            for (long j = 0; j < cfg.n_exp; ++j) mean += batch.at(j, 0, 0) * batch.at(j, 0, k);
            mean /= static_cast<double>(cfg.n_exp);
            for (long j = 0; j < cfg.n_exp; ++j) {
                const double v = batch.at(j, 0, 0) * batch.at(j, 0, k) - mean;
                var += v * v;
            }
            var /= static_cast<double>(cfg.n_exp - 1);
            const double sem = std::sqrt(var / cfg.n_exp);
            const double exact = correlators::binned_correlation(m, {{0, 0}, {0, k}}, m.rho0);
            CHECK(std::abs(mean - exact) < 5 * std::max(sem, 1e-12));
            ++n_checked;
        }
        return n_checked;
    };
    SUBCASE("photocounting qubit") { CHECK(check_model(driven_qubit_jump(), 90, 60) == 6); }
    SUBCASE("homodyne qubit") { CHECK(check_model(qubit_diffusive(), 91, 60) == 6); }
    SUBCASE("weak-convergence sanity: halving the step stays within the noise") {
        const auto m = qubit_diffusive();
        SimConfig cfg;
        cfg.n_exp = 20000;
        cfg.seed = 92;
        cfg.substeps_per_bin = 60;
        const auto coarse = smesim::simulate_batch(m, cfg);
        cfg.substeps_per_bin = 120;
        const auto fine = smesim::simulate_batch(m, cfg);
        for (int k = 0; k < 4; ++k) {
            double m1 = 0.0, m2 = 0.0, v1 = 0.0, v2 = 0.0;
            for (long j = 0; j < cfg.n_exp; ++j) {
                m1 += coarse.at(j, 0, k);
                m2 += fine.at(j, 0, k);
            }
            m1 /= static_cast<double>(cfg.n_exp);
            m2 /= static_cast<double>(cfg.n_exp);
            for (long j = 0; j < cfg.n_exp; ++j) {
                v1 += (coarse.at(j, 0, k) - m1) * (coarse.at(j, 0, k) - m1);
                v2 += (fine.at(j, 0, k) - m2) * (fine.at(j, 0, k) - m2);
            }
            const double sem = std::sqrt((v1 + v2) / (cfg.n_exp - 1.0) / cfg.n_exp);
            CHECK(std::abs(m1 - m2) < 3 * sem);
        }
    }
}
