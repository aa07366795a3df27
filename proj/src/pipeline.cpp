#include "ucgp/pipeline.hpp"

#include "ucgp/error.hpp"

#include <numeric>

namespace ucgp {

Bounds genome_bounds(const CgmConfig& cfg) {
  const auto g = static_cast<std::size_t>(cfg.grid_dim);
  Bounds b = Bounds::unit(genome_dim(cfg));
  for (std::size_t i = g * g; i < b.dim(); ++i) b.lower[i] = -1.0;
  return b;
}

std::vector<double> empty_genome(const CgmConfig& cfg) { return std::vector<double>(genome_dim(cfg), 0.0); }

std::vector<FeatureVec> encode_crops(const Encoder& encoder, std::span<const Sample> samples) {
  std::vector<IrImage> crops;
  crops.reserve(samples.size());
  for (const auto& s : samples) crops.push_back(crop(s.image, s.roi));
  return encoder.encode_batch(crops);
}

AttackContext::AttackContext(std::vector<Sample> samples, CleanReference ref, AttackSetup setup, EncoderHandle encoder)
    : samples_(std::move(samples)), ref_(std::move(ref)), setup_(std::move(setup)), encoder_(std::move(encoder)) {
  if (!encoder_) throw config_error("attack context needs an encoder");
  if (samples_.empty()) throw config_error("attack context needs samples");
  if (encoder_->feature_dim() != ref_.dim())
    throw config_error("encoder feature_dim " + std::to_string(encoder_->feature_dim()) +
                       " does not match the reference dimension " + std::to_string(ref_.dim()));
  for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i].index = i;
}

FitnessReport AttackContext::report(std::span<const double> genome, std::span<const std::size_t> batch,
                                    std::uint64_t seed) const {
  std::vector<Sample> subset;
  subset.reserve(batch.size());
  for (std::size_t i : batch) subset.push_back(samples_.at(i));

  std::vector<Eigen::VectorXd> clean(batch.size());
  std::vector<std::size_t> missing;
  {
    std::lock_guard lock(cache_mutex_);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto it = clean_cache_.find({batch[k], seed});
      if (it != clean_cache_.end()) clean[k] = it->second;
      else missing.push_back(k);
    }
  }
  if (!missing.empty()) {
    std::vector<Sample> todo;
    for (std::size_t k : missing) todo.push_back(subset[k]);
    const auto feats = clean_eot_features(todo, setup_, *encoder_, seed);
    std::lock_guard lock(cache_mutex_);
    for (std::size_t m = 0; m < missing.size(); ++m) {
      clean[missing[m]] = feats[m];
      clean_cache_.emplace(std::make_pair(batch[missing[m]], seed), feats[m]);
    }
  }
  return evaluate_candidate(genome, subset, clean, ref_, setup_, *encoder_, seed);
}

FitnessReport AttackContext::full_report(std::span<const double> genome, std::uint64_t seed) const {
  std::vector<std::size_t> all(samples_.size());
  std::iota(all.begin(), all.end(), 0);
  return report(genome, all, seed);
}

SearchProblem AttackContext::problem() const {
  SearchProblem p;
  p.dim = genome_dim(setup_.cgm);
  p.n_items = samples_.size();
  p.bounds = genome_bounds(setup_.cgm);
  p.fitness = [this](std::span<const double> g, std::span<const std::size_t> batch, std::uint64_t seed) {
    return fitness(g, batch, seed);
  };
  return p;
}

}  // namespace ucgp
