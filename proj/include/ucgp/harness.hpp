#pragma once

#include "ucgp/cgm.hpp"
#include "ucgp/core.hpp"
#include "ucgp/encoder.hpp"
#include "ucgp/paste.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct AttackOutcome {
  std::string sample_id;
  ClassScores clean_scores;
  ClassScores adv_scores;
  std::string clean_top1;
  std::string adv_top1;
  std::string target;  // ground-truth category
  bool success = false;
};

struct MetricSummary {
  std::size_t count = 0;
  double asr = 0;                  // percent
  double clean_accuracy = 0;       // m(x), fraction
  double adv_accuracy = 0;         // m(x'), fraction
  std::optional<double> rel_drop;  // percent; undefined when m(x) = 0
  double target_promotion = 0;     // mean Δs_target
  double adv_margin = 0;           // mean M_adv
};

/// Builds an outcome from two score vectors; success is adv top-1 != target.
AttackOutcome make_outcome(std::string sample_id, ClassScores clean, ClassScores adv, const std::string& target);

/// Scores the clean ROI crop and the patched ROI crop.
AttackOutcome eval_sample(const Encoder& encoder, const Sample& sample, const RenderedPatch& patch,
                          const PasteConfig& paste_cfg, const std::string& target);
AttackOutcome eval_sample(const Encoder& encoder, const Sample& sample, const PatchParams& p, const CgmConfig& cgm,
                          const PasteConfig& paste_cfg, const std::string& target);

/// Index of the highest adversarial score among non-target labels (ties: earlier label).
std::size_t strongest_other(const ClassScores& scores, const std::string& target);

/// s_{c*}(x') − s_{c*}(x), c* the strongest non-target class under attack.
double target_promotion(const AttackOutcome& o);
/// s_{c*}(x') − s_target(x').
double adv_margin(const AttackOutcome& o);

MetricSummary summarize(std::span<const AttackOutcome> outcomes);

std::vector<AttackOutcome> evaluate_patch(const Encoder& encoder, std::span<const Sample> samples, const PatchParams& p,
                                          const CgmConfig& cgm, const PasteConfig& paste_cfg,
                                          const std::string& target, std::size_t workers = 1);

struct SweepCell {
  std::size_t dataset = 0;
  std::size_t encoder = 0;
  std::optional<MetricSummary> summary;
  std::string error;  // set when the cell failed
};

struct SweepDataset {
  std::string name;
  std::string category;
  std::vector<Sample> samples;
};

/// Applies one fixed patch to every (dataset, encoder) pair; failing cells are
/// recorded and the sweep continues. Cells come back dataset-major.
std::vector<SweepCell> transfer_sweep(const PatchParams& p, const CgmConfig& cgm, const PasteConfig& paste_cfg,
                                      std::span<const SweepDataset> datasets, std::span<const EncoderHandle> encoders,
                                      std::size_t workers = 1);

nlohmann::json to_json(const MetricSummary& m);
nlohmann::json to_json(const AttackOutcome& o);
/// Columns: sample_id, clean_top1, adv_top1, success, ds_target, m_adv.
void write_outcomes_csv(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path);

}  // namespace ucgp
