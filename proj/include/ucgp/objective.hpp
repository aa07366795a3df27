#pragma once

#include "ucgp/augment.hpp"
#include "ucgp/cgm.hpp"
#include "ucgp/core.hpp"
#include "ucgp/encoder.hpp"
#include "ucgp/paste.hpp"
#include "ucgp/reference.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct ObjectiveWeights {
  double lambda_topo = 0.12;
  double lambda_budget = 0.03;
  void validate() const;
};

struct BudgetTerms {
  double therm = 0;
  double edge = 0;
  double area = 0;
  double total() const noexcept { return therm + edge + area; }
};

struct FitnessReport {
  double l_subspace = 0;
  double l_topo = 0;
  double l_budget = 0;
  BudgetTerms budget;
  double total = 0;
  std::vector<double> per_sample_residuals;  // one per (sample, transform), sample-major
};

/// Everything besides the genome that a candidate evaluation depends on.
struct AttackSetup {
  CgmConfig cgm;
  PasteConfig paste;
  AugmentConfig augment;
  ObjectiveWeights weights;
  std::size_t n_eot = 4;
};

/// −(1/B) Σ r_i.
double loss_subspace(const CleanReference& ref, std::span<const Eigen::VectorXd> adv);

/// Σ P log(P/Q) with 0 log 0 = 0, both sides floored at 1e-12, clamped at 0.
double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

/// −KL(P‖Q) against the full reference graph; adv must align one-to-one with ref.features.
double loss_topology(const CleanReference& ref, std::span<const Eigen::VectorXd> adv);
/// −KL(P‖Q) where P is built from `clean` (a batch-aligned subset) with the frozen kernel scale.
double loss_topology(std::span<const Eigen::VectorXd> clean, std::span<const Eigen::VectorXd> adv, double kernel_scale);

/// Stealth terms of one paste; throws when the patch or ring has no support.
BudgetTerms loss_budget(const PasteResult& r);
/// As loss_budget, but a supportless paste contributes only its area term.
BudgetTerms loss_budget_or_area(const PasteResult& r);

/// Seed of the first EOT draw for dataset item `sample_index`; draw i uses +i.
std::uint64_t eot_seed(std::uint64_t seed, std::size_t sample_index) noexcept;

/// Per-sample mean encoder feature of the unpatched ROI crops under the same
/// EOT draws a candidate would see. These are the clean side of the topology term.
std::vector<Eigen::VectorXd> clean_eot_features(std::span<const Sample> batch, const AttackSetup& setup,
                                                const Encoder& encoder, std::uint64_t seed);

FitnessReport evaluate_candidate(std::span<const double> genome, std::span<const Sample> batch,
                                 const CleanReference& ref, const AttackSetup& setup, const Encoder& encoder,
                                 std::uint64_t seed);
/// Same, with the clean EOT features of `batch` precomputed.
FitnessReport evaluate_candidate(std::span<const double> genome, std::span<const Sample> batch,
                                 std::span<const Eigen::VectorXd> clean_features, const CleanReference& ref,
                                 const AttackSetup& setup, const Encoder& encoder, std::uint64_t seed);

nlohmann::json to_json(const FitnessReport& r);

}  // namespace ucgp
