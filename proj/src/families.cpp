// families.cpp — Builders for the built-in model families

#include "corrfit/families.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "corrfit/operators.hpp"

namespace corrfit::families {

namespace {

using model::Transform;
using ParamMap = std::map<std::string, double>;

const std::map<std::string, std::vector<ParamInfo>>& schemas() {
    static const std::map<std::string, std::vector<ParamInfo>> table = {
        {"anharmonic_heterodyne",
         {{"kerr", Transform::log, true},
          {"eps_x", Transform::identity, true},
          {"eps_y", Transform::identity, true},
          {"kappa", Transform::log, true},
          {"eta", Transform::logit, false},
          {"gain", Transform::log, false}}},
        {"qubit_photodetection",
         {{"delta", Transform::identity, true},
          {"omega", Transform::identity, true},
          {"gamma", Transform::log, true},
          {"dark", Transform::log, true},
          {"eta", Transform::logit, false}}},
        {"two_photon_homodyne",
         {{"kappa1", Transform::log, true},
          {"kappa2", Transform::log, true},
          {"alpha2", Transform::identity, false},
          {"eta", Transform::logit, false},
          {"gain", Transform::log, false}}},
        {"lossy_oscillator",
         {{"osc_freq", Transform::identity, true},
          {"kappa", Transform::log, true},
          {"eta", Transform::logit, false},
          {"alpha0", Transform::identity, false},
          {"gain", Transform::log, false}}},
    };
    return table;
}

DetectorSpec diffusive_detector(const Operator& L, double eta, const Settings& s) {
    DetectorSpec d;
    d.kind = DetectorKind::diffusive;
    d.L = L;
    d.efficiency = eta;
    d.gain = s.gain;
    d.bin_width = s.bin_width;
    d.n_bins = s.n_bins;
    return d;
}

DetectorSpec jump_detector(const Operator& L, double eta, double dark, const Settings& s) {
    DetectorSpec d;
    d.kind = DetectorKind::jump;
    d.L = L;
    d.efficiency = eta;
    d.dark_rate = dark;
    d.bin_width = s.bin_width;
    d.n_bins = s.n_bins;
    return d;
}

ConcreteModel build_anharmonic_heterodyne(const ParamMap& v, const Settings& s) {
    if (s.n_trunc < 2) throw std::invalid_argument("anharmonic_heterodyne: n_trunc required");
    const auto fock = ops::make_fock_ops(s.n_trunc);
    const Complex eps(v.at("eps_x"), v.at("eps_y"));
    const double kappa = v.at("kappa");

    ConcreteModel m;
    m.H = -0.5 * v.at("kerr") * (fock.a.adjoint() * fock.a.adjoint() * fock.a * fock.a) +
          std::conj(eps) * fock.a + eps * fock.a.adjoint();
    const Operator Lx = std::sqrt(kappa / 2.0) * fock.a;
    const Operator Lp = Complex(0, -1) * std::sqrt(kappa / 2.0) * fock.a;
    m.jumps = {Lx, Lp};
    m.detectors = {diffusive_detector(Lx, v.at("eta"), s),
                   diffusive_detector(Lp, v.at("eta"), s)};
    m.detector_channel = {0, 1};
    m.rho0_kind = ConcreteModel::InitialState::steady;
    return m;
}

ConcreteModel build_qubit_photodetection(const ParamMap& v, const Settings& s) {
    const auto q = ops::make_qubit_ops();
    ConcreteModel m;
    m.H = v.at("delta") * q.sigma_z + v.at("omega") * q.sigma_x;
    const Operator L = std::sqrt(v.at("gamma")) * q.sigma_minus;
    m.jumps = {L};
    m.detectors = {jump_detector(L, v.at("eta"), v.at("dark"), s)};
    m.detector_channel = {0};
    m.rho0_kind = ConcreteModel::InitialState::given;
    m.rho0 = ops::fock_state(2, 1); // excited state
    return m;
}

ConcreteModel build_two_photon_homodyne(const ParamMap& v, const Settings& s) {
    if (s.n_trunc < 3) throw std::invalid_argument("two_photon_homodyne: n_trunc required");
    const auto fock = ops::make_fock_ops(s.n_trunc);
    const double k1 = v.at("kappa1"), k2 = v.at("kappa2"), a2 = v.at("alpha2");

    ConcreteModel m;
    m.H = Operator::Zero(s.n_trunc, s.n_trunc);
    const Operator L1x = std::sqrt(k1 / 2.0) * fock.a;
    const Operator L1p = Complex(0, -1) * std::sqrt(k1 / 2.0) * fock.a;
    const Operator L2 = std::sqrt(k2) * (fock.a * fock.a -
                                         (a2 * a2) * Operator::Identity(s.n_trunc, s.n_trunc));
    // the X quadrature is recorded; the other heterodyne output is discarded,
    // which leaves an unmonitored halved-rate channel
    m.jumps = {L1x, L1p, L2};
    m.detectors = {diffusive_detector(L1x, v.at("eta"), s)};
    m.detector_channel = {0};
    m.rho0_kind = ConcreteModel::InitialState::steady;
    return m;
}

ConcreteModel build_lossy_oscillator(const ParamMap& v, const Settings& s) {
    if (s.n_trunc < 2) throw std::invalid_argument("lossy_oscillator: n_trunc required");
    const auto fock = ops::make_fock_ops(s.n_trunc);
    ConcreteModel m;
    m.H = v.at("osc_freq") * fock.number;
    const Operator L = std::sqrt(v.at("kappa")) * fock.a;
    m.jumps = {L};
    m.detectors = {diffusive_detector(L, v.at("eta"), s)};
    m.detector_channel = {0};
    m.rho0_kind = ConcreteModel::InitialState::given;
    m.rho0 = ops::coherent_state(s.n_trunc, v.at("alpha0"));
    return m;
}

ConcreteModel dispatch(const std::string& family, const ParamMap& v, const Settings& s) {
    if (family == "anharmonic_heterodyne") return build_anharmonic_heterodyne(v, s);
    if (family == "qubit_photodetection") return build_qubit_photodetection(v, s);
    if (family == "two_photon_homodyne") return build_two_photon_homodyne(v, s);
    if (family == "lossy_oscillator") return build_lossy_oscillator(v, s);
    throw std::invalid_argument("unknown model family: " + family);
}

} // namespace

const std::vector<ParamInfo>& schema(const std::string& family_name) {
    const auto it = schemas().find(family_name);
    if (it == schemas().end())
        throw std::invalid_argument("unknown model family: " + family_name);
    return it->second;
}

std::vector<std::string> known_families() {
    std::vector<std::string> names;
    for (const auto& [name, sch] : schemas()) names.push_back(name);
    return names;
}

ModelFamily make(const std::string& family_name, const Settings& settings,
                 const std::map<std::string, double>& fixed,
                 const std::vector<std::string>& free_names) {
    const auto& sch = schema(family_name);
    ModelFamily fam;
    fam.name = family_name;

    std::vector<std::string> order; // free parameters in schema order
    for (const auto& info : sch) {
        const bool is_free =
            std::find(free_names.begin(), free_names.end(), info.name) != free_names.end();
        if (is_free) {
            model::ParamSpec spec;
            spec.name = info.name;
            spec.transform = info.transform;
            fam.params.push_back(std::move(spec));
            order.push_back(info.name);
        } else if (!fixed.count(info.name)) {
            throw std::invalid_argument("family " + family_name + ": parameter '" +
                                        info.name + "' neither fixed nor free");
        }
    }
    for (const auto& name : free_names) {
        bool known = false;
        for (const auto& info : sch) known = known || info.name == name;
        if (!known)
            throw std::invalid_argument("family " + family_name + ": unknown parameter '" +
                                        name + "'");
    }

    fam.build = [family_name, settings, fixed, order](const std::vector<double>& theta) {
        ParamMap v = fixed;
        for (std::size_t i = 0; i < order.size(); ++i) v[order[i]] = theta[i];
        for (const auto& [name, factor] : settings.param_scale) {
            if (!v.count(name))
                throw std::invalid_argument("param_scale refers to unknown parameter " + name);
            v[name] *= factor;
        }
        return dispatch(family_name, v, settings);
    };
    return fam;
}

} // namespace corrfit::families
