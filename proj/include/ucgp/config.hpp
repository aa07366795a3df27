#pragma once

#include "ucgp/metade.hpp"
#include "ucgp/objective.hpp"
#include "ucgp/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct SweepSpec {
  std::vector<std::filesystem::path> datasets;
  std::vector<nlohmann::json> encoders;
};

/// Everything a run needs. Relative paths resolve against the config file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> dataset;    // default: <out>/synth/dataset.json
  std::optional<std::filesystem::path> clean;      // default: <out>/synth/clean.json
  std::optional<std::filesystem::path> reference;  // default: <out>/reference.json
  nlohmann::json encoder = {{"kind", "toy"}};
  std::size_t k = 8;
  double clean_min_prob = 0.5;  // clean images need this category probability (softmax of scores); 0 keeps all
  AttackSetup setup;
  DeConfig metade;
  SynthConfig synth;
  SweepSpec sweep;

  std::filesystem::path dataset_path() const { return dataset.value_or(output_dir / "synth" / "dataset.json"); }
  std::filesystem::path clean_path() const { return clean.value_or(output_dir / "synth" / "clean.json"); }
  std::filesystem::path reference_path() const { return reference.value_or(output_dir / "reference.json"); }
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

nlohmann::json to_json(const PasteConfig& c);
PasteConfig paste_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ObjectiveWeights& w);
ObjectiveWeights objective_weights_from_json(const nlohmann::json& j);

}  // namespace ucgp
