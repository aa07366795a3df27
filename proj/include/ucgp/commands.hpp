#pragma once

#include "ucgp/config.hpp"
#include "ucgp/harness.hpp"
#include "ucgp/metade.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ucgp {

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> out;
};

RunConfig apply_overrides(RunConfig cfg, const Overrides& o);

SynthOutput cmd_synth(const RunConfig& cfg);
CleanReference cmd_stats(const RunConfig& cfg);

struct OptimizeOutput {
  PatchParams patch;
  RunResult run;
  FitnessReport final_report;
};
OptimizeOutput cmd_optimize(const RunConfig& cfg);

struct EvaluateOutput {
  std::vector<AttackOutcome> outcomes;
  MetricSummary summary;
};
EvaluateOutput cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& patch_path);

std::filesystem::path cmd_render(const RunConfig& cfg, const std::filesystem::path& patch_path, int side);
std::filesystem::path cmd_export(const RunConfig& cfg, const std::filesystem::path& patch_path, double size_mm);
/// Pastes the patch onto every dataset item; returns the written image paths.
std::vector<std::filesystem::path> cmd_paste(const RunConfig& cfg, const std::filesystem::path& patch_path);
std::vector<SweepCell> cmd_sweep(const RunConfig& cfg, const std::filesystem::path& patch_path);

/// Full CLI: parses argv, runs one subcommand, maps errors to exit codes 1/2/3.
int run_cli(int argc, char** argv);

}  // namespace ucgp
