#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ilsim/dagger.hpp"

namespace ilsim {

/// Every module's settings in one tree. All fields have defaults; a config
/// file only lists what it changes.
struct RunConfig {
  DaggerConfig dagger;
  LossWeights losses;
  std::filesystem::path output_dir = "out";

  /// Propagates the shared sections (observation, refine) to every consumer
  /// and validates the result.
  void finalize();
};

/// Unknown keys and ill-typed values raise ValidationError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& file);
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace ilsim
