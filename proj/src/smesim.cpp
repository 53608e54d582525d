// smesim.cpp — CPTP trajectory stepping and batch simulation

#include "corrfit/smesim.hpp"

#include <cmath>
#include <stdexcept>

#include "corrfit/lindblad.hpp"
#include "corrfit/parallel.hpp"
#include "corrfit/rng.hpp"

namespace corrfit::smesim {

namespace {

// z such that A = z * B, or 0 if not proportional
Complex proportionality(const Operator& A, const Operator& B) {
    Eigen::Index imax = 0, jmax = 0;
    const double bmax = B.cwiseAbs().maxCoeff(&imax, &jmax);
    if (bmax <= 0.0) return 0.0;
    const Complex z = A(imax, jmax) / B(imax, jmax);
    if ((A - z * B).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
        return z;
    return 0.0;
}

} // namespace

StepEngine::StepEngine(const ConcreteModel& m, double dt) : dt_(dt) {
    if (dt <= 0.0) throw std::invalid_argument("StepEngine: dt must be positive");
    const int d = m.dim();
    const Complex i(0.0, 1.0);
    Operator K = -i * m.H;
    for (const auto& L : m.jumps) K -= 0.5 * (L.adjoint() * L);
    M0_ = Operator::Identity(d, d) + dt * K;

    std::vector<int> monitor(m.jumps.size(), -1);
    for (std::size_t k = 0; k < m.detectors.size(); ++k) {
        const int ch = m.detector_channel[k];
        if (monitor[ch] >= 0)
            throw std::invalid_argument("StepEngine: channel monitored by two detectors");
        monitor[ch] = static_cast<int>(k);
        const auto& ds = m.detectors[k];
        Detector det;
        det.kind = ds.kind;
        det.L = ds.L;
        det.LdL = ds.L.adjoint() * ds.L;
        det.X = ds.L + ds.L.adjoint();
        det.eta = ds.efficiency;
        det.sqrt_eta = std::sqrt(ds.efficiency);
        det.theta = ds.dark_rate;
        dets_.push_back(std::move(det));
    }

    // non-detection completion: sum_c (1 - eta_c 1_monitored) L_c rho L_c† dt,
    // grouped over proportional channels
    for (std::size_t c = 0; c < m.jumps.size(); ++c) {
        const double w = monitor[c] >= 0 ? 1.0 - m.detectors[monitor[c]].efficiency : 1.0;
        if (w <= 0.0) continue;
        bool merged = false;
        for (auto& grp : completions_) {
            const Complex z = proportionality(m.jumps[c], grp.B);
            if (z != Complex(0, 0)) {
                grp.weight += w * std::norm(z);
                merged = true;
                break;
            }
        }
        if (!merged) {
            completions_.push_back({m.jumps[c], m.jumps[c].adjoint(), w});
        }
    }

    M_.resize(d, d);
    T_.resize(d, d);
    W_.resize(d, d);
}

void StepEngine::step(Operator& rho, std::span<const double> noise,
                      std::span<const double> uniforms, std::span<double> dY) {
    const double sqrt_dt = std::sqrt(dt_);
    int clicked = -1;
    for (std::size_t k = 0; k < dets_.size(); ++k) {
        auto& det = dets_[k];
        if (det.kind == DetectorKind::diffusive) {
            const double y =
                det.sqrt_eta * (det.X.transpose().cwiseProduct(rho)).sum().real();
            dY[k] = y * dt_ + noise[k] * sqrt_dt;
        } else {
            const double rate =
                det.theta + det.eta * (det.LdL.transpose().cwiseProduct(rho)).sum().real();
            const double p = rate * dt_;
            if (p > 0.1)
                throw SolverError("step_jump: click probability above 0.1 per substep; "
                                  "reduce the step size");
            const bool click = uniforms[k] < p;
            dY[k] = click ? 1.0 : 0.0;
            if (click && clicked < 0) clicked = static_cast<int>(k);
        }
    }

    if (clicked >= 0) {
        // click map: rho <- theta rho + eta L rho L† (then normalise); at most
        // one click per substep is resolved, consistent at first order
        const auto& det = dets_[static_cast<std::size_t>(clicked)];
        T_.noalias() = det.L * rho;
        W_.noalias() = T_ * det.L.adjoint();
        rho = det.theta * rho + det.eta * W_;
    } else {
        M_ = M0_;
        for (std::size_t k = 0; k < dets_.size(); ++k) {
            const auto& det = dets_[k];
            if (det.kind == DetectorKind::diffusive && det.sqrt_eta != 0.0)
                M_ += (det.sqrt_eta * dY[k]) * det.L;
        }
        T_.noalias() = M_ * rho;
        W_.noalias() = T_ * M_.adjoint();
        for (const auto& grp : completions_) {
            T_.noalias() = grp.B * rho;
            W_.noalias() += (grp.weight * dt_) * (T_ * grp.Bdag);
        }
        rho = W_;
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) throw SolverError("smesim: state trace collapsed");
    rho /= tr;
}

Operator step_diffusive(const ConcreteModel& m, const Operator& rho, double dt,
                        std::span<const double> gaussians, std::span<double> dY) {
    for (const auto& det : m.detectors)
        if (det.kind != DetectorKind::diffusive)
            throw std::invalid_argument("step_diffusive: model has non-diffusive detectors");
    StepEngine engine(m, dt);
    Operator out = rho;
    engine.step(out, gaussians, {}, dY);
    return out;
}

Operator step_jump(const ConcreteModel& m, const Operator& rho, double dt,
                   std::span<const double> uniforms, std::span<double> dN) {
    for (const auto& det : m.detectors)
        if (det.kind != DetectorKind::jump)
            throw std::invalid_argument("step_jump: model has non-jump detectors");
    StepEngine engine(m, dt);
    Operator out = rho;
    engine.step(out, {}, uniforms, dN);
    return out;
}

TrajectoryBatch simulate_batch(const ConcreteModel& m, const SimConfig& cfg,
                               const std::string& fingerprint) {
    if (m.detectors.empty()) throw std::invalid_argument("simulate_batch: no detectors");
    if (cfg.n_exp < 1) throw std::invalid_argument("simulate_batch: n_exp must be >= 1");
    if (cfg.substeps_per_bin < 1)
        throw std::invalid_argument("simulate_batch: substeps_per_bin must be >= 1");
    const int n_det = static_cast<int>(m.detectors.size());
    const int n_bins = m.detectors[0].n_bins;
    const double bin_width = m.detectors[0].bin_width;
    for (const auto& det : m.detectors) {
        if (det.n_bins != n_bins || std::abs(det.bin_width - bin_width) > 1e-12 * bin_width)
            throw std::invalid_argument("simulate_batch: detectors must share the bin grid");
    }
    if (n_bins < 1) throw std::invalid_argument("simulate_batch: n_bins must be >= 1");

    const Operator rho_init = lindblad::resolved_rho0(m);
    const double dt = bin_width / cfg.substeps_per_bin;
    const int substeps = cfg.substeps_per_bin;

    TrajectoryBatch batch;
    batch.n_exp = cfg.n_exp;
    batch.n_detectors = n_det;
    batch.n_bins = n_bins;
    batch.bin_width = bin_width;
    batch.substeps_per_bin = substeps;
    batch.seed = cfg.seed;
    batch.fingerprint = fingerprint;
    batch.values.assign(static_cast<std::size_t>(cfg.n_exp) * n_det * n_bins, 0.0);

    // fixed-size chunks keep the mean-state reduction order deterministic
    const long chunk_size = 256;
    const long n_chunks = (cfg.n_exp + chunk_size - 1) / chunk_size;
    const int d = m.dim();
    std::vector<std::vector<Operator>> chunk_states;
    if (cfg.accumulate_mean_state)
        chunk_states.assign(static_cast<std::size_t>(n_chunks),
                            std::vector<Operator>(static_cast<std::size_t>(n_bins) + 1,
                                                  Operator::Zero(d, d)));

    par::parallel_for(n_chunks, [&](std::int64_t c0, std::int64_t c1) {
        StepEngine engine(m, dt);
        std::vector<double> noise(static_cast<std::size_t>(n_det));
        std::vector<double> uniforms(static_cast<std::size_t>(n_det));
        std::vector<double> dY(static_cast<std::size_t>(n_det));
        std::vector<double> acc(static_cast<std::size_t>(n_det));
        Operator rho(d, d);
        const bool diag_check_needed = cfg.positivity_tol >= 0.0;

        for (std::int64_t chunk = c0; chunk < c1; ++chunk) {
            const long t_begin = chunk * chunk_size;
            const long t_end = std::min<long>(t_begin + chunk_size, cfg.n_exp);
            for (long traj = t_begin; traj < t_end; ++traj) {
                const rng::CounterRng gen(cfg.seed, static_cast<std::uint64_t>(traj));
                rho = rho_init;
                if (cfg.accumulate_mean_state)
                    chunk_states[static_cast<std::size_t>(chunk)][0] += rho;
                for (int b = 0; b < n_bins; ++b) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int s = 0; s < substeps; ++s) {
                        const std::uint64_t step_idx =
                            static_cast<std::uint64_t>(b) * substeps + s;
                        for (int k = 0; k < n_det; ++k) {
                            if (m.detectors[static_cast<std::size_t>(k)].kind ==
                                DetectorKind::diffusive)
                                noise[static_cast<std::size_t>(k)] =
                                    gen.gaussian(step_idx, static_cast<std::uint32_t>(k));
                            else
                                uniforms[static_cast<std::size_t>(k)] =
                                    gen.uniform(step_idx, static_cast<std::uint32_t>(k));
                        }
                        engine.step(rho, noise, uniforms, dY);
                        for (int k = 0; k < n_det; ++k)
                            acc[static_cast<std::size_t>(k)] += dY[static_cast<std::size_t>(k)];
                    }
                    for (int k = 0; k < n_det; ++k) {
                        const auto& det = m.detectors[static_cast<std::size_t>(k)];
                        const double v = det.kind == DetectorKind::diffusive
                                             ? det.gain / det.bin_width *
                                                   acc[static_cast<std::size_t>(k)]
                                             : acc[static_cast<std::size_t>(k)];
                        batch.at(traj, k, b) = v;
                    }
                    if (diag_check_needed) {
                        const double dmin = rho.diagonal().real().minCoeff();
                        if (dmin < -cfg.positivity_tol)
                            throw SolverError(
                                "simulate_batch: state positivity violated; reduce dt");
                    }
                    if (cfg.accumulate_mean_state)
                        chunk_states[static_cast<std::size_t>(chunk)]
                                    [static_cast<std::size_t>(b) + 1] += rho;
                }
            }
        }
    }, cfg.threads);

    if (cfg.accumulate_mean_state) {
        batch.mean_states.assign(static_cast<std::size_t>(n_bins) + 1, Operator::Zero(d, d));
        for (long c = 0; c < n_chunks; ++c)
            for (int e = 0; e <= n_bins; ++e)
                batch.mean_states[static_cast<std::size_t>(e)] +=
                    chunk_states[static_cast<std::size_t>(c)][static_cast<std::size_t>(e)];
        for (auto& st : batch.mean_states) st /= static_cast<double>(cfg.n_exp);
    }
    return batch;
}

} // namespace corrfit::smesim
