#pragma once

#include <json.hpp>

#include "mpm/checkpoint.hpp"
#include "mpm/masking.hpp"
#include "mpm/mpm_model.hpp"
#include "mpm/signal_features.hpp"
#include "mpm/train.hpp"

namespace mpm {

using Json = nlohmann::json;

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Reading tolerates missing keys (defaults stay in place) so partial config
// files work; writing always emits every field.

void to_json(Json& j, const MpmConfig& c);
void from_json(const Json& j, MpmConfig& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const FeatureConfig& c);
void from_json(const Json& j, FeatureConfig& c);
void to_json(Json& j, const TrainingMetadata& m);
void from_json(const Json& j, TrainingMetadata& m);

}  // namespace mpm
