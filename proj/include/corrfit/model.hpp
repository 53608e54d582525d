// model.hpp — Parameterised system description: Hamiltonian, jump channels,
// detectors, and the Liouvillian / correlation superoperators

#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

#include "corrfit/operators.hpp"

namespace corrfit::model {

enum class DetectorKind { jump, diffusive };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::diffusive;
    Operator L;                // monitored jump operator, sqrt(rate) units
    double efficiency = 1.0;   // eta in [0, 1]
    double dark_rate = 0.0;    // theta >= 0, jump detectors only
    double gain = 1.0;         // G > 0, diffusive detectors only
    double bin_width = 1.0;    // digitisation bin Delta t
    int n_bins = 0;
};

struct ConcreteModel {
    Operator H;
    std::vector<Operator> jumps;          // every dissipation channel
    std::vector<DetectorSpec> detectors;  // each monitors one channel
    std::vector<int> detector_channel;    // detectors[i].L == jumps[detector_channel[i]]
    enum class InitialState { given, steady };
    InitialState rho0_kind = InitialState::given;
    Operator rho0;                        // resolved state (also for steady, after instantiate)

    int dim() const { return static_cast<int>(H.rows()); }
    void validate() const;                // throws std::invalid_argument on violations
};

// -i[H, rho] + sum_k D_{L_k}(rho)
Operator liouvillian_apply(const ConcreteModel& m, const Operator& rho);

// D_L(rho) = L rho L† - 1/2 {L†L, rho}
Operator dissipator_apply(const Operator& L, const Operator& rho);

// C_L(rho) = theta rho + eta L rho L†   (jump)
//          = sqrt(eta) (L rho + rho L†) (diffusive)
Operator correlation_superop_apply(const DetectorSpec& d, const Operator& rho);

// Cached Liouvillian application: L(rho) = K rho + rho K† + sum_k L_k rho L_k†,
// with K = -iH - 1/2 sum_k L_k†L_k. Holds scratch buffers; use one instance
// per thread.
class LiouvillianOp {
  public:
    explicit LiouvillianOp(const ConcreteModel& m);
    int dim() const { return static_cast<int>(K_.rows()); }
    void apply(const Operator& x, Operator& out) const;
    Operator apply(const Operator& x) const;
    // max-row-sum estimate of the generator magnitude (rate scale)
    double norm_scale() const { return scale_; }

  private:
    Operator K_;
    std::vector<Operator> jumps_;
    double scale_;
    mutable Operator t1_, t2_;
};

// Correlation superoperator with scratch buffer, same threading contract.
class CorrelationOp {
  public:
    explicit CorrelationOp(const DetectorSpec& d);
    void apply(const Operator& x, Operator& out) const;
    Operator apply(const Operator& x) const;

  private:
    DetectorKind kind_;
    Operator L_, Ldag_;
    double theta_, eta_, sqrt_eta_;
    mutable Operator t1_;
};

// column-major vectorisation: the matrix of rho -> L(rho) acting on vec(rho)
Eigen::SparseMatrix<Complex> liouvillian_matrix(const ConcreteModel& m);

// ---- parameterised families -------------------------------------------------

enum class Transform { identity, log, logit };

struct ParamSpec {
    std::string name;
    Transform transform = Transform::identity;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

// maps a fit parameter to the unconstrained space used by the optimiser
double to_unconstrained(const ParamSpec& p, double value);
double from_unconstrained(const ParamSpec& p, double u);
void check_bounds(const ParamSpec& p, double value); // throws naming the parameter

struct ModelFamily {
    std::string name;
    std::vector<ParamSpec> params;
    // deterministic builder; rho0_kind == steady is resolved by instantiate()
    std::function<ConcreteModel(const std::vector<double>&)> build;

    int param_index(const std::string& pname) const;
};

// validates bounds, builds, resolves a steady-state initial condition
ConcreteModel instantiate(const ModelFamily& f, const std::vector<double>& theta);

} // namespace corrfit::model

namespace corrfit {
using model::ConcreteModel;
using model::DetectorKind;
using model::DetectorSpec;
using model::ModelFamily;
} // namespace corrfit
