// families.hpp — Built-in parameterised model families

#pragma once

#include <map>
#include <string>
#include <vector>

#include "corrfit/model.hpp"

namespace corrfit::families {

// detector/digitisation settings shared by a family instance
struct Settings {
    double bin_width = 1.0;
    int n_bins = 1;
    double gain = 1.0;
    int n_trunc = 0; // Fock truncation; ignored by qubit families
    // per-parameter multiplicative factors, applied after assembly (used for
    // joint fits across configurations with a known linkage, e.g. a scaled
    // drive amplitude)
    std::map<std::string, double> param_scale;
};

struct ParamInfo {
    std::string name;
    model::Transform transform;
    bool frequency_unit; // reported in kHz with the 2*pi table convention
};

// full parameter schema of a family, in canonical order
const std::vector<ParamInfo>& schema(const std::string& family_name);
std::vector<std::string> known_families();

// Family with the given free parameters (schema order); the remaining
// parameters are fixed to the values in `fixed`. All rates are angular
// frequencies in the chosen unit system.
ModelFamily make(const std::string& family_name, const Settings& settings,
                 const std::map<std::string, double>& fixed,
                 const std::vector<std::string>& free_names);

} // namespace corrfit::families
