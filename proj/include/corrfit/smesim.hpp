// smesim.hpp — Stochastic master equation trajectory simulation with a
// positivity-preserving first-order scheme and acquisition-chain binning

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corrfit/model.hpp"

namespace corrfit::smesim {

struct SimConfig {
    int substeps_per_bin = 100; // bin width / fine step
    long n_exp = 1;
    std::uint64_t seed = 0;
    enum class Scheme { cptp_first_order } scheme = Scheme::cptp_first_order;
    int threads = 0;                   // 0: auto
    bool accumulate_mean_state = false; // track ensemble-averaged state at bin edges
    double positivity_tol = 1e-8;
};

struct TrajectoryBatch {
    long n_exp = 0;
    int n_detectors = 0;
    int n_bins = 0;
    double bin_width = 0.0;
    int substeps_per_bin = 0;
    std::uint64_t seed = 0;
    std::string fingerprint; // model/config provenance
    std::vector<double> values; // [trajectory][detector][bin]
    // ensemble mean of the conditioned state at t = 0, dt, ..., n_bins*dt
    std::vector<Operator> mean_states;

    Eigen::Index index(long traj, int det, int bin) const {
        return (static_cast<Eigen::Index>(traj) * n_detectors + det) * n_bins + bin;
    }
    double at(long traj, int det, int bin) const { return values[index(traj, det, bin)]; }
    double& at(long traj, int det, int bin) { return values[index(traj, det, bin)]; }
};

// Per-model step kernel. Holds precomputed operators and scratch buffers;
// create one instance per thread.
class StepEngine {
  public:
    StepEngine(const ConcreteModel& m, double dt);

    double dt() const { return dt_; }
    int n_detectors() const { return static_cast<int>(dets_.size()); }

    // One weak first-order CPTP step. Noise draws are standard normals, one
    // per detector (ignored for jump detectors); dY receives the increment of
    // the measurement process per detector (jump detectors: dN in {0, 1}).
    void step(Operator& rho, std::span<const double> noise,
              std::span<const double> uniforms, std::span<double> dY);

  private:
    double dt_;
    Operator M0_;                 // I + (-iH - 1/2 sum L†L) dt
    struct Detector {
        model::DetectorKind kind;
        Operator L;
        Operator LdL;      // L†L (jump rate)
        Operator X;        // L + L† (diffusive record)
        double eta = 1.0, sqrt_eta = 1.0, theta = 0.0;
    };
    std::vector<Detector> dets_;
    struct CompletionGroup {
        Operator B;       // base operator
        Operator Bdag;
        double weight;    // sum of (1 - eta 1_monitored) |z|^2 over channels z*B
    };
    std::vector<CompletionGroup> completions_;
    Operator M_, T_, W_;
};

// spec-level single-step operations (convenience wrappers around StepEngine)
Operator step_diffusive(const ConcreteModel& m, const Operator& rho, double dt,
                        std::span<const double> gaussians, std::span<double> dY);
Operator step_jump(const ConcreteModel& m, const Operator& rho, double dt,
                   std::span<const double> uniforms, std::span<double> dN);

// n_exp independent trajectories, binned per the acquisition chain model.
// Reproducible bit-for-bit from the seed under any thread count.
TrajectoryBatch simulate_batch(const ConcreteModel& m, const SimConfig& cfg,
                               const std::string& fingerprint = "");

} // namespace corrfit::smesim

namespace corrfit {
using smesim::SimConfig;
using smesim::TrajectoryBatch;
} // namespace corrfit
