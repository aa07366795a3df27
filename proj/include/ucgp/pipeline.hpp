#pragma once

#include "ucgp/encoder.hpp"
#include "ucgp/metade.hpp"
#include "ucgp/objective.hpp"
#include "ucgp/reference.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace ucgp {

/// Search box of the patch genome: gates in [0,1], edge deforms in [-1,1].
Bounds genome_bounds(const CgmConfig& cfg);

/// Features of the untransformed ROI crops.
std::vector<FeatureVec> encode_crops(const Encoder& encoder, std::span<const Sample> samples);

/// The attack as a search problem: dataset, frozen reference and encoder.
/// Clean EOT features are cached per (item, seed); the cache only saves work.
class AttackContext {
 public:
  AttackContext(std::vector<Sample> samples, CleanReference ref, AttackSetup setup, EncoderHandle encoder);

  FitnessReport report(std::span<const double> genome, std::span<const std::size_t> batch, std::uint64_t seed) const;
  double fitness(std::span<const double> genome, std::span<const std::size_t> batch, std::uint64_t seed) const {
    return report(genome, batch, seed).total;
  }

  /// Full-dataset report under `seed`.
  FitnessReport full_report(std::span<const double> genome, std::uint64_t seed) const;

  SearchProblem problem() const;

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const CleanReference& reference() const noexcept { return ref_; }
  const AttackSetup& setup() const noexcept { return setup_; }
  const Encoder& encoder() const noexcept { return *encoder_; }

 private:
  std::vector<Sample> samples_;
  CleanReference ref_;
  AttackSetup setup_;
  EncoderHandle encoder_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::size_t, std::uint64_t>, Eigen::VectorXd> clean_cache_;
};

/// All-gates-off genome (deforms 0): the empty patch.
std::vector<double> empty_genome(const CgmConfig& cfg);

}  // namespace ucgp
