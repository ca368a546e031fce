#pragma once

#include "safefilter/backup/parametric.hpp"
#include "safefilter/backup/tabular.hpp"
#include "safefilter/model/ensemble.hpp"
#include "safefilter/value/grid.hpp"

#include <string>

namespace safefilter::model {

/// Versioned self-describing checkpoints: JSON documents whose numeric arrays
/// are base64-encoded little-endian IEEE-754 doubles.
std::string encode_f64(const std::vector<double>& values);
std::vector<double> decode_f64(const std::string& text);

std::string save_ensemble(const EnsembleModel& model);
EnsembleModel load_ensemble(const std::string& text);

std::string save_tabular_policy(const backup::TabularPolicy& policy);
backup::TabularPolicy load_tabular_policy(const std::string& text);

std::string save_parametric_policy(const backup::ParametricPolicy& policy);
backup::ParametricPolicy load_parametric_policy(const std::string& text);

std::string save_value_grid(const value::GridValueFunction& v);
value::GridValueFunction load_value_grid(const std::string& text);

}  // namespace safefilter::model
