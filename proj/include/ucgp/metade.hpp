#pragma once

#include "ucgp/augment.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct DeConfig {
  std::size_t population = 50;
  std::size_t generations = 100;
  Range f_scale{0.1, 1.0};
  Range crossover_rate{0.05, 0.95};
  double meta_adapt_prob = 0.1;
  std::size_t stagnation_window = 15;
  double stagnation_tol = 1e-6;
  double refresh_fraction = 0.3;
  std::size_t batch_size = 8;     // 0 = whole dataset every generation
  std::size_t query_budget = 0;   // 0 = unlimited (generations is the only stop)
  std::size_t workers = 1;

  void validate() const;
};

struct Meta {
  double f_scale = 0.5;
  double crossover_rate = 0.5;
  friend bool operator==(const Meta&, const Meta&) = default;
};

struct Individual {
  std::vector<double> genome;
  Meta meta;
  std::optional<double> fitness;
};

/// Per-coordinate search box; DE proposals are clamped into it.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
  static Bounds unit(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }
  std::size_t dim() const noexcept { return lower.size(); }
};

/// A minimization problem over a dataset of `n_items` evaluation units.
/// `fitness(genome, batch, seed)` must be pure.
struct SearchProblem {
  std::size_t dim = 0;
  std::size_t n_items = 1;
  Bounds bounds;
  std::function<double(std::span<const double>, std::span<const std::size_t>, std::uint64_t)> fitness;
};

using Evaluator = std::function<double(std::span<const double>)>;

std::vector<Individual> initialize(const DeConfig& cfg, std::size_t dim, std::uint64_t seed);
std::vector<Individual> initialize(const DeConfig& cfg, const Bounds& bounds, std::uint64_t seed);

/// DE/rand/1/bin trial from explicit donors: mutant = a + F (b − c) with the
/// target's F, binomial crossover at the target's rate with one forced mutant
/// coordinate, clamp into bounds; the child re-samples its meta with
/// probability meta_adapt_prob.
Individual make_trial(const Individual& target, std::span<const double> a, std::span<const double> b,
                      std::span<const double> c, const DeConfig& cfg, const Bounds& bounds, std::uint64_t seed);

/// Picks distinct donors r1, r2, r3 != target and calls make_trial.
Individual propose(std::span<const Individual> pop, std::size_t target, const DeConfig& cfg, std::uint64_t seed);
Individual propose(std::span<const Individual> pop, std::size_t target, const DeConfig& cfg, const Bounds& bounds,
                   std::uint64_t seed);

struct StepResult {
  std::vector<Individual> population;
  Individual best;          // best trial-or-parent after this step
  std::size_t evaluations = 0;
};

/// One generation of greedy one-to-one selection. Every individual must carry
/// a fitness for the current evaluator. At most `budget` trials are evaluated.
StepResult step(std::vector<Individual> pop, const Evaluator& evaluator, std::size_t gen, const DeConfig& cfg,
                const Bounds& bounds, std::uint64_t seed, std::size_t budget = SIZE_MAX);

struct GenerationRecord {
  std::size_t gen = 0;
  double best = 0;   // best-ever fitness
  double mean = 0;   // mean fitness of the current population
  std::size_t evals = 0;  // cumulative
  std::size_t refreshed = 0;
  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct RunResult {
  std::vector<double> best_genome;
  double best_fitness = 0;
  std::vector<GenerationRecord> history;  // history[0] is the initial population
  std::size_t evaluations = 0;
};

/// Sorted batch of item indices for generation `gen` (all items when batch_size is 0 or >= n).
std::vector<std::size_t> sample_batch(std::size_t n_items, std::size_t batch_size, std::size_t gen, std::uint64_t seed);

using GenerationCallback = std::function<void(const GenerationRecord&)>;

RunResult run(const DeConfig& cfg, const SearchProblem& problem, std::uint64_t seed,
              const GenerationCallback& on_generation = {});

nlohmann::json to_json(const DeConfig& cfg);
DeConfig de_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationRecord& r);

}  // namespace ucgp
