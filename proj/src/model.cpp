// model.cpp — Model validation, superoperator application, parameter transforms

#include "corrfit/model.hpp"

#include <cmath>
#include <stdexcept>

#include "corrfit/lindblad.hpp"

namespace corrfit::model {

namespace {

bool same_operator(const Operator& a, const Operator& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a - b).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff());
}

} // namespace

void ConcreteModel::validate() const {
    const int d = dim();
    if (H.rows() != H.cols()) throw std::invalid_argument("model: H must be square");
    for (const auto& L : jumps) {
        if (L.rows() != d || L.cols() != d)
            throw std::invalid_argument("model: jump operator dimension mismatch");
    }
    if (detector_channel.size() != detectors.size())
        throw std::invalid_argument("model: detector channel wiring incomplete");
    for (std::size_t i = 0; i < detectors.size(); ++i) {
        const auto& det = detectors[i];
        const int ch = detector_channel[i];
        if (ch < 0 || ch >= static_cast<int>(jumps.size()))
            throw std::invalid_argument("model: detector references unknown channel");
        if (!same_operator(det.L, jumps[ch]))
            throw std::invalid_argument("model: detector L does not match its channel");
        if (det.efficiency < 0.0 || det.efficiency > 1.0)
            throw std::invalid_argument("model: efficiency outside [0, 1]");
        if (det.dark_rate < 0.0)
            throw std::invalid_argument("model: dark count rate must be nonnegative");
        if (det.kind == DetectorKind::diffusive && det.gain <= 0.0)
            throw std::invalid_argument("model: gain must be positive");
        if (det.bin_width <= 0.0)
            throw std::invalid_argument("model: bin width must be positive");
    }
    if (rho0_kind == InitialState::given) {
        if (rho0.rows() != d || rho0.cols() != d)
            throw std::invalid_argument("model: initial state dimension mismatch");
    }
}

Operator dissipator_apply(const Operator& L, const Operator& rho) {
    const Operator Ld = L.adjoint();
    const Operator LdL = Ld * L;
    return L * rho * Ld - 0.5 * (LdL * rho + rho * LdL);
}

Operator liouvillian_apply(const ConcreteModel& m, const Operator& rho) {
    if (rho.rows() != m.dim() || rho.cols() != m.dim())
        throw std::invalid_argument("liouvillian_apply: dimension mismatch");
    const Complex i(0.0, 1.0);
    Operator out = -i * (m.H * rho - rho * m.H);
    for (const auto& L : m.jumps) out += dissipator_apply(L, rho);
    return out;
}

Operator correlation_superop_apply(const DetectorSpec& d, const Operator& rho) {
    if (rho.rows() != d.L.rows() || rho.cols() != d.L.cols())
        throw std::invalid_argument("correlation_superop_apply: dimension mismatch");
    if (d.kind == DetectorKind::jump) {
        return d.dark_rate * rho + d.efficiency * d.L * rho * d.L.adjoint();
    }
    return std::sqrt(d.efficiency) * (d.L * rho + rho * d.L.adjoint());
}

LiouvillianOp::LiouvillianOp(const ConcreteModel& m) : jumps_(m.jumps) {
    const Complex i(0.0, 1.0);
    K_ = -i * m.H;
    for (const auto& L : jumps_) K_ -= 0.5 * (L.adjoint() * L);
    scale_ = 2.0 * K_.cwiseAbs().rowwise().sum().maxCoeff();
    scale_ = std::max(scale_, 1e-30);
    const int d = dim();
    t1_.resize(d, d);
    t2_.resize(d, d);
}

void LiouvillianOp::apply(const Operator& x, Operator& out) const {
    out.noalias() = K_ * x;
    out.noalias() += x * K_.adjoint();
    for (const auto& L : jumps_) {
        t1_.noalias() = L * x;
        out.noalias() += t1_ * L.adjoint();
    }
}

Operator LiouvillianOp::apply(const Operator& x) const {
    Operator out(x.rows(), x.cols());
    apply(x, out);
    return out;
}

CorrelationOp::CorrelationOp(const DetectorSpec& d)
    : kind_(d.kind), L_(d.L), Ldag_(d.L.adjoint()), theta_(d.dark_rate),
      eta_(d.efficiency), sqrt_eta_(std::sqrt(d.efficiency)) {
    t1_.resize(L_.rows(), L_.cols());
}

void CorrelationOp::apply(const Operator& x, Operator& out) const {
    if (kind_ == DetectorKind::jump) {
        t1_.noalias() = L_ * x;
        out.noalias() = t1_ * Ldag_;
        out *= eta_;
        out += theta_ * x;
    } else {
        out.noalias() = L_ * x;
        out.noalias() += x * Ldag_;
        out *= sqrt_eta_;
    }
}

Operator CorrelationOp::apply(const Operator& x) const {
    Operator out(x.rows(), x.cols());
    apply(x, out);
    return out;
}

Eigen::SparseMatrix<Complex> liouvillian_matrix(const ConcreteModel& m) {
    const int d = m.dim();
    const int N = d * d;
    const Complex i(0.0, 1.0);
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(N) * (2 * d));

    // vec(A rho) = (I (x) A) vec, vec(rho B) = (B^T (x) I) vec
    auto add_left = [&](const Operator& A, Complex w) {
        for (int c = 0; c < d; ++c)
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q)
                    if (A(p, q) != Complex(0, 0))
                        trip.emplace_back(c * d + p, c * d + q, w * A(p, q));
    };
    auto add_right = [&](const Operator& B, Complex w) {
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
                if (B(p, q) != Complex(0, 0))
                    for (int r = 0; r < d; ++r)
                        trip.emplace_back(q * d + r, p * d + r, w * B(p, q));
    };
    auto add_both = [&](const Operator& A, const Operator& B, Complex w) {
        // vec(A rho B) = (B^T (x) A) vec
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q) {
                if (B(p, q) == Complex(0, 0)) continue;
                for (int r = 0; r < d; ++r)
                    for (int s = 0; s < d; ++s)
                        if (A(r, s) != Complex(0, 0))
                            trip.emplace_back(q * d + r, p * d + s, w * B(p, q) * A(r, s));
            }
    };

    add_left(m.H, -i);
    add_right(m.H, i);
    for (const auto& L : m.jumps) {
        const Operator Ld = L.adjoint();
        const Operator LdL = Ld * L;
        add_both(L, Ld, 1.0);
        add_left(LdL, -0.5);
        add_right(LdL, -0.5);
    }
    Eigen::SparseMatrix<Complex> out(N, N);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

double to_unconstrained(const ParamSpec& p, double value) {
    switch (p.transform) {
        case Transform::log: return std::log(value);
        case Transform::logit: return std::log(value / (1.0 - value));
        case Transform::identity: return value;
    }
    return value;
}

double from_unconstrained(const ParamSpec& p, double u) {
    // saturate so that extreme optimiser excursions map back to valid values
    switch (p.transform) {
        case Transform::log: return std::exp(std::clamp(u, -300.0, 300.0));
        case Transform::logit: return 1.0 / (1.0 + std::exp(-std::clamp(u, -36.0, 36.0)));
        case Transform::identity: return u;
    }
    return u;
}

void check_bounds(const ParamSpec& p, double value) {
    bool ok = true;
    switch (p.transform) {
        case Transform::log: ok = value > 0.0; break;
        case Transform::logit: ok = value > 0.0 && value < 1.0; break;
        case Transform::identity: ok = value >= p.lower && value <= p.upper; break;
    }
    if (!std::isfinite(value)) ok = false;
    if (!ok) throw std::invalid_argument("parameter '" + p.name + "' out of bounds: " +
                                         std::to_string(value));
}

int ModelFamily::param_index(const std::string& pname) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == pname) return static_cast<int>(i);
    throw std::invalid_argument("family '" + name + "' has no parameter '" + pname + "'");
}

ConcreteModel instantiate(const ModelFamily& f, const std::vector<double>& theta) {
    if (theta.size() != f.params.size())
        throw std::invalid_argument("instantiate: expected " +
                                    std::to_string(f.params.size()) + " parameters");
    for (std::size_t i = 0; i < theta.size(); ++i) check_bounds(f.params[i], theta[i]);
    ConcreteModel m = f.build(theta);
    m.validate();
    if (m.rho0_kind == ConcreteModel::InitialState::steady) {
        m.rho0 = lindblad::steady_state(m);
    }
    return m;
}

} // namespace corrfit::model
