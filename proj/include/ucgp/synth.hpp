#pragma once

#include "ucgp/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace ucgp {

struct SynthConfig {
  std::size_t count = 32;        // attack set size
  std::size_t clean_count = 24;  // separate clean reference set
  int width = 96;
  int height = 128;
  std::string category = "person";
  void validate() const;
};

struct SynthOutput {
  std::filesystem::path dataset_manifest;
  std::filesystem::path clean_manifest;
};

/// One synthetic frame: cluttered cool background with one warm person; `roi` receives its box.
IrImage synth_frame(int width, int height, std::uint64_t seed, Roi& roi);

/// Writes images/, dataset.json and clean.json under `dir`.
SynthOutput synth_dataset(const SynthConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& c);

}  // namespace ucgp
