#include "ucgp/metade.hpp"

#include "ucgp/error.hpp"
#include "ucgp/parallel.hpp"
#include "ucgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ucgp {

namespace {

enum Stream : std::uint64_t { kInit = 11, kPropose, kBatch, kRefresh, kStep };

Meta sample_meta(const DeConfig& cfg, CounterRng& rng) {
  return {rng.uniform(cfg.f_scale.lo, cfg.f_scale.hi), rng.uniform(cfg.crossover_rate.lo, cfg.crossover_rate.hi)};
}

Individual random_individual(const DeConfig& cfg, const Bounds& bounds, CounterRng& rng) {
  Individual ind;
  ind.genome.resize(bounds.dim());
  for (std::size_t d = 0; d < bounds.dim(); ++d) ind.genome[d] = rng.uniform(bounds.lower[d], bounds.upper[d]);
  ind.meta = sample_meta(cfg, rng);
  return ind;
}

void check_bounds(const Bounds& b) {
  if (b.lower.size() != b.upper.size() || b.lower.empty()) throw config_error("search bounds are malformed");
  for (std::size_t d = 0; d < b.dim(); ++d)
    if (!(b.lower[d] <= b.upper[d])) throw config_error("search bounds are not ordered");
}

void evaluate_all(std::vector<Individual>& pop, std::span<const std::size_t> which, const Evaluator& evaluator,
                  std::size_t workers) {
  parallel_for(which.size(), workers, [&](std::size_t k) {
    auto& ind = pop[which[k]];
    ind.fitness = evaluator(ind.genome);
  });
}

}  // namespace

void DeConfig::validate() const {
  if (population < 4) throw config_error("metade.population must be >= 4 (DE/rand/1 needs 3 donors)");
  if (!(f_scale.lo > 0.0 && f_scale.lo <= f_scale.hi)) throw config_error("metade.f_scale range is invalid");
  if (!(crossover_rate.lo >= 0.0 && crossover_rate.lo <= crossover_rate.hi && crossover_rate.hi <= 1.0))
    throw config_error("metade.crossover_rate range is invalid");
  if (!(meta_adapt_prob >= 0.0 && meta_adapt_prob <= 1.0)) throw config_error("metade.meta_adapt_prob must be in [0,1]");
  if (!(refresh_fraction > 0.0 && refresh_fraction < 1.0)) throw config_error("metade.refresh_fraction must be in (0,1)");
  if (stagnation_window < 1) throw config_error("metade.stagnation_window must be >= 1");
  if (query_budget != 0 && query_budget < population)
    throw config_error("metade.query_budget must cover at least the initial population");
}

std::vector<Individual> initialize(const DeConfig& cfg, const Bounds& bounds, std::uint64_t seed) {
  check_bounds(bounds);
  CounterRng rng(derive_seed(seed, kInit));
  std::vector<Individual> pop;
  pop.reserve(cfg.population);
  for (std::size_t i = 0; i < cfg.population; ++i) pop.push_back(random_individual(cfg, bounds, rng));
  return pop;
}

std::vector<Individual> initialize(const DeConfig& cfg, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw config_error("genome dimension must be >= 1");
  return initialize(cfg, Bounds::unit(dim), seed);
}

Individual make_trial(const Individual& target, std::span<const double> a, std::span<const double> b,
                      std::span<const double> c, const DeConfig& cfg, const Bounds& bounds, std::uint64_t seed) {
  const std::size_t dim = target.genome.size();
  if (a.size() != dim || b.size() != dim || c.size() != dim || bounds.dim() != dim)
    throw runtime_error("DE donor dimensions disagree");
  CounterRng rng(seed);
  const std::size_t forced = rng.below(dim);
  Individual child;
  child.genome.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const bool take_mutant = d == forced || rng.uniform() < target.meta.crossover_rate;
    const double v = take_mutant ? a[d] + target.meta.f_scale * (b[d] - c[d]) : target.genome[d];
    child.genome[d] = std::clamp(v, bounds.lower[d], bounds.upper[d]);
  }
  child.meta = rng.bernoulli(cfg.meta_adapt_prob) ? sample_meta(cfg, rng) : target.meta;
  return child;
}

Individual propose(std::span<const Individual> pop, std::size_t target, const DeConfig& cfg, const Bounds& bounds,
                   std::uint64_t seed) {
  const std::size_t n = pop.size();
  if (n < 4) throw config_error("DE/rand/1 needs a population of at least 4");
  if (target >= n) throw runtime_error("target index out of range");
  CounterRng rng(derive_seed(seed, kPropose));
  std::size_t r[3];
  for (int k = 0; k < 3; ++k) {
    std::size_t pick;
    do {
      pick = rng.below(n);
    } while (pick == target || std::find(r, r + k, pick) != r + k);
    r[k] = pick;
  }
  return make_trial(pop[target], pop[r[0]].genome, pop[r[1]].genome, pop[r[2]].genome, cfg, bounds, rng.next_u64());
}

Individual propose(std::span<const Individual> pop, std::size_t target, const DeConfig& cfg, std::uint64_t seed) {
  if (pop.empty()) throw config_error("empty population");
  return propose(pop, target, cfg, Bounds::unit(pop.front().genome.size()), seed);
}

StepResult step(std::vector<Individual> pop, const Evaluator& evaluator, std::size_t gen, const DeConfig& cfg,
                const Bounds& bounds, std::uint64_t seed, std::size_t budget) {
  for (const auto& ind : pop)
    if (!ind.fitness) throw runtime_error("step requires an evaluated population");
  const std::size_t n_trials = std::min(pop.size(), budget);
  std::vector<Individual> trials(n_trials);
  const std::uint64_t gen_seed = derive_seed(seed, kStep, gen);
  for (std::size_t j = 0; j < n_trials; ++j) trials[j] = propose(pop, j, cfg, bounds, derive_seed(gen_seed, j));
  std::vector<std::size_t> all(n_trials);
  std::iota(all.begin(), all.end(), 0);
  evaluate_all(trials, all, evaluator, cfg.workers);

  for (std::size_t j = 0; j < n_trials; ++j)
    if (*trials[j].fitness < *pop[j].fitness) pop[j] = std::move(trials[j]);

  StepResult out;
  out.evaluations = n_trials;
  const auto best = std::min_element(pop.begin(), pop.end(),
                                     [](const Individual& x, const Individual& y) { return *x.fitness < *y.fitness; });
  out.best = *best;
  out.population = std::move(pop);
  return out;
}

std::vector<std::size_t> sample_batch(std::size_t n_items, std::size_t batch_size, std::size_t gen, std::uint64_t seed) {
  std::vector<std::size_t> idx(n_items);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch_size == 0 || batch_size >= n_items) return idx;
  CounterRng rng(derive_seed(seed, kBatch, gen));
  for (std::size_t i = 0; i < batch_size; ++i) std::swap(idx[i], idx[i + rng.below(n_items - i)]);
  idx.resize(batch_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

RunResult run(const DeConfig& cfg, const SearchProblem& problem, std::uint64_t seed,
              const GenerationCallback& on_generation) {
  cfg.validate();
  check_bounds(problem.bounds);
  if (problem.bounds.dim() != problem.dim) throw config_error("problem bounds do not match its dimension");
  if (!problem.fitness) throw config_error("problem has no fitness function");
  const std::size_t budget = cfg.query_budget == 0 ? std::numeric_limits<std::size_t>::max() : cfg.query_budget;

  RunResult result;
  std::size_t evals = 0;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> best_genome;
  const auto note = [&](const Individual& ind) {
    if (*ind.fitness < best_fitness) {
      best_fitness = *ind.fitness;
      best_genome = ind.genome;
    }
  };
  const auto make_evaluator = [&](const std::vector<std::size_t>& batch, std::size_t gen) -> Evaluator {
    const std::uint64_t gen_seed = derive_seed(seed, 0x6576616Cull, gen);
    return [&problem, batch, gen_seed](std::span<const double> g) { return problem.fitness(g, batch, gen_seed); };
  };
  const auto mean_fitness = [](const std::vector<Individual>& pop) {
    double s = 0.0;
    for (const auto& ind : pop) s += *ind.fitness;
    return s / static_cast<double>(pop.size());
  };

  auto pop = initialize(cfg, problem.bounds, seed);
  std::vector<std::size_t> batch = sample_batch(problem.n_items, cfg.batch_size, 0, seed);
  Evaluator evaluator = make_evaluator(batch, 0);
  std::vector<std::size_t> everyone(pop.size());
  std::iota(everyone.begin(), everyone.end(), 0);
  evaluate_all(pop, everyone, evaluator, cfg.workers);
  evals += pop.size();
  for (const auto& ind : pop) note(ind);
  result.history.push_back({0, best_fitness, mean_fitness(pop), evals, 0});
  if (on_generation) on_generation(result.history.back());

  double last_improvement = best_fitness;
  std::size_t stagnant = 0;
  for (std::size_t gen = 1; gen <= cfg.generations && evals < budget; ++gen) {
    auto next_batch = sample_batch(problem.n_items, cfg.batch_size, gen, seed);
    if (next_batch != batch) {
      // Survivors are re-scored so parent/child comparisons share a batch.
      if (budget - evals < pop.size() + 1) break;
      batch = std::move(next_batch);
      evaluator = make_evaluator(batch, gen);
      evaluate_all(pop, everyone, evaluator, cfg.workers);
      evals += pop.size();
      for (const auto& ind : pop) note(ind);
    }

    StepResult st = step(std::move(pop), evaluator, gen, cfg, problem.bounds, seed, budget - evals);
    pop = std::move(st.population);
    evals += st.evaluations;
    for (const auto& ind : pop) note(ind);

    std::size_t refreshed = 0;
    if (best_fitness < last_improvement - cfg.stagnation_tol) {
      last_improvement = best_fitness;
      stagnant = 0;
    } else if (++stagnant >= cfg.stagnation_window) {
      stagnant = 0;
      const std::size_t keep = static_cast<std::size_t>(
          std::min_element(pop.begin(), pop.end(), [](const Individual& x, const Individual& y) {
            return *x.fitness < *y.fitness;
          }) - pop.begin());
      std::vector<std::size_t> order(pop.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return *pop[x].fitness > *pop[y].fitness; });
      std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.refresh_fraction * pop.size()));
      count = std::min(count, budget - evals);
      std::vector<std::size_t> worst;
      for (std::size_t k = 0; k < order.size() && worst.size() < count; ++k)
        if (order[k] != keep) worst.push_back(order[k]);
      std::sort(worst.begin(), worst.end());
      CounterRng rng(derive_seed(seed, kRefresh, gen));
      for (std::size_t i : worst) pop[i] = random_individual(cfg, problem.bounds, rng);
      evaluate_all(pop, worst, evaluator, cfg.workers);
      evals += worst.size();
      for (std::size_t i : worst) note(pop[i]);
      refreshed = worst.size();
    }

    result.history.push_back({gen, best_fitness, mean_fitness(pop), evals, refreshed});
    if (on_generation) on_generation(result.history.back());
  }

  result.best_genome = std::move(best_genome);
  result.best_fitness = best_fitness;
  result.evaluations = evals;
  return result;
}

nlohmann::json to_json(const DeConfig& c) {
  return {{"population", c.population},
          {"generations", c.generations},
          {"f_scale", {c.f_scale.lo, c.f_scale.hi}},
          {"crossover_rate", {c.crossover_rate.lo, c.crossover_rate.hi}},
          {"meta_adapt_prob", c.meta_adapt_prob},
          {"stagnation_window", c.stagnation_window},
          {"stagnation_tol", c.stagnation_tol},
          {"refresh_fraction", c.refresh_fraction},
          {"batch_size", c.batch_size},
          {"query_budget", c.query_budget}};
}

DeConfig de_config_from_json(const nlohmann::json& j) {
  DeConfig c;
  c.population = j.value("population", c.population);
  c.generations = j.value("generations", c.generations);
  if (j.contains("f_scale")) {
    const auto v = j.at("f_scale").get<std::vector<double>>();
    if (v.size() != 2) throw config_error("metade.f_scale must be [lo, hi]");
    c.f_scale = {v[0], v[1]};
  }
  if (j.contains("crossover_rate")) {
    const auto v = j.at("crossover_rate").get<std::vector<double>>();
    if (v.size() != 2) throw config_error("metade.crossover_rate must be [lo, hi]");
    c.crossover_rate = {v[0], v[1]};
  }
  c.meta_adapt_prob = j.value("meta_adapt_prob", c.meta_adapt_prob);
  c.stagnation_window = j.value("stagnation_window", c.stagnation_window);
  c.stagnation_tol = j.value("stagnation_tol", c.stagnation_tol);
  c.refresh_fraction = j.value("refresh_fraction", c.refresh_fraction);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.query_budget = j.value("query_budget", c.query_budget);
  c.workers = j.value("workers", c.workers);
  c.validate();
  return c;
}

nlohmann::json to_json(const GenerationRecord& r) {
  return {{"gen", r.gen}, {"best", r.best}, {"mean", r.mean}, {"evals", r.evals}, {"refreshed", r.refreshed}};
}

}  // namespace ucgp
