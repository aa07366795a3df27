#include "doctest.h"

#include "ucgp/error.hpp"
#include "ucgp/metade.hpp"

#include <numeric>

using namespace ucgp;

namespace {

double sphere(std::span<const double> g) {
  double s = 0;
  for (double v : g) s += v * v;
  return s;
}

SearchProblem sphere_problem(std::size_t dim, double lo = -1.0, double hi = 1.0) {
  SearchProblem p;
  p.dim = dim;
  p.n_items = 1;
  p.bounds = {std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
  p.fitness = [](std::span<const double> g, std::span<const std::size_t>, std::uint64_t) { return sphere(g); };
  return p;
}

Individual evaluated(std::vector<double> g, Meta m = {}) {
  Individual i{std::move(g), m, std::nullopt};
  i.fitness = sphere(i.genome);
  return i;
}

}  // namespace

TEST_CASE("initialization: box, determinism, uniformity") {
  DeConfig cfg;
  cfg.population = 4;
  const auto a = initialize(cfg, 2, 9);
  REQUIRE(a.size() == 4);
  for (const auto& ind : a) {
    for (double v : ind.genome) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(ind.meta.f_scale >= 0.1);
    CHECK(ind.meta.f_scale <= 1.0);
    CHECK(ind.meta.crossover_rate >= 0.05);
    CHECK(ind.meta.crossover_rate <= 0.95);
    CHECK_FALSE(ind.fitness.has_value());
  }
  const auto b = initialize(cfg, 2, 9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i].genome == b[i].genome);

  cfg.population = 100;
  const auto big = initialize(cfg, 100, 10);
  double sum = 0;
  for (const auto& ind : big) sum += std::accumulate(ind.genome.begin(), ind.genome.end(), 0.0);
  const double mean = sum / 1e4;
  CHECK(mean >= 0.48);
  CHECK(mean <= 0.52);

  const Bounds box{{-2.0, 5.0}, {-1.0, 6.0}};
  for (const auto& ind : initialize(cfg, box, 11)) {
    CHECK(ind.genome[0] >= -2.0);
    CHECK(ind.genome[0] <= -1.0);
    CHECK(ind.genome[1] >= 5.0);
  }
  CHECK_THROWS_AS(initialize(cfg, 0, 1), Error);
}

TEST_CASE("zero difference vector: the mutant is the first donor") {
  DeConfig cfg;
  cfg.meta_adapt_prob = 0;
  const Individual target = evaluated({0.1, 0.2, 0.3, 0.4, 0.5}, {0.7, 0.5});
  const std::vector<double> a{0.9, 0.8, 0.7, 0.6, 0.55}, same{0.3, 0.3, 0.3, 0.3, 0.3};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto child = make_trial(target, a, same, same, cfg, Bounds::unit(5), seed);
    int crossed = 0;
    for (std::size_t d = 0; d < 5; ++d) {
      CHECK((child.genome[d] == a[d] || child.genome[d] == target.genome[d]));
      crossed += child.genome[d] == a[d];
    }
    CHECK(crossed >= 1);  // one coordinate is always taken from the mutant
    CHECK(child.meta == target.meta);
  }
}

TEST_CASE("full crossover gives the clamped mutant") {
  DeConfig cfg;
  const Individual target = evaluated({0.5, 0.5, 0.5}, {0.8, 1.0});
  const std::vector<double> a{0.9, 0.1, 0.5}, b{0.6, 0.0, 0.2}, c{0.1, 0.5, 0.2};
  const auto child = make_trial(target, a, b, c, cfg, Bounds::unit(3), 4);
  CHECK(child.genome[0] == 1.0);                         // 0.9 + 0.8*0.5 clamps
  CHECK(child.genome[1] == 0.0);                         // 0.1 - 0.4 clamps
  CHECK(child.genome[2] == doctest::Approx(0.5));
}

TEST_CASE("zero crossover rate changes exactly one coordinate") {
  DeConfig cfg;
  const Individual target = evaluated(std::vector<double>(10, 0.5), {0.5, 0.0});
  std::vector<double> a(10, 0.9), b(10, 0.6), c(10, 0.4);
  const auto child = make_trial(target, a, b, c, cfg, Bounds::unit(10), 5);
  int changed = 0;
  for (std::size_t d = 0; d < 10; ++d) changed += child.genome[d] != 0.5;
  CHECK(changed == 1);
}

TEST_CASE("children occasionally re-sample their meta parameters") {
  DeConfig cfg;
  cfg.meta_adapt_prob = 0.5;
  const Individual target = evaluated({0.5, 0.5}, {0.3, 0.3});
  int resampled = 0;
  for (std::uint64_t s = 0; s < 400; ++s)
    resampled += !(make_trial(target, target.genome, target.genome, target.genome, cfg, Bounds::unit(2), s).meta ==
                   target.meta);
  CHECK(resampled > 150);
  CHECK(resampled < 250);
}

TEST_CASE("propose is deterministic and needs four individuals") {
  DeConfig cfg;
  cfg.population = 6;
  auto pop = initialize(cfg, 4, 1);
  for (auto& i : pop) i.fitness = sphere(i.genome);
  const auto a = propose(pop, 2, cfg, 77);
  const auto b = propose(pop, 2, cfg, 77);
  CHECK(a.genome == b.genome);
  CHECK(a.meta == b.meta);
  pop.resize(3);
  CHECK_THROWS_AS(propose(pop, 0, cfg, 1), Error);
}

TEST_CASE("a constant evaluator leaves the population and best unchanged") {
  DeConfig cfg;
  cfg.population = 6;
  auto pop = initialize(cfg, 3, 2);
  for (auto& i : pop) i.fitness = 1.0;
  const auto st = step(pop, [](std::span<const double>) { return 1.0; }, 1, cfg, Bounds::unit(3), 3);
  for (std::size_t i = 0; i < pop.size(); ++i) CHECK(st.population[i].genome == pop[i].genome);
  CHECK(*st.best.fitness == 1.0);
  CHECK(st.evaluations == 6);
}

TEST_CASE("greedy selection never worsens any slot and respects the budget") {
  DeConfig cfg;
  cfg.population = 8;
  auto pop = initialize(cfg, 5, 3);
  for (auto& i : pop) i.fitness = sphere(i.genome);
  double best = 1e9;
  for (const auto& i : pop) best = std::min(best, *i.fitness);
  const double initial_best = best;
  for (std::size_t gen = 1; gen <= 40; ++gen) {
    auto st = step(pop, sphere, gen, cfg, Bounds::unit(5), 4);
    for (std::size_t i = 0; i < pop.size(); ++i) CHECK(*st.population[i].fitness <= *pop[i].fitness);
    CHECK(*st.best.fitness <= best);
    best = *st.best.fitness;
    pop = std::move(st.population);
  }
  CHECK(best < initial_best);
  const auto partial = step(pop, sphere, 41, cfg, Bounds::unit(5), 4, 3);
  CHECK(partial.evaluations == 3);
}

TEST_CASE("run on the sphere converges with a monotone best-ever record") {
  DeConfig cfg;
  cfg.population = 20;
  cfg.generations = 100;
  cfg.batch_size = 0;
  const auto res = run(cfg, sphere_problem(5), 42);
  REQUIRE(res.history.size() == 101);
  for (std::size_t g = 1; g < res.history.size(); ++g) {
    CHECK(res.history[g].best <= res.history[g - 1].best);
    CHECK(res.history[g].gen == g);
  }
  CHECK(res.best_fitness < 1e-4);
  CHECK(sphere(res.best_genome) == res.best_fitness);
  CHECK(res.evaluations == 20 + 100 * 20 + [&] {
    std::size_t r = 0;
    for (const auto& h : res.history) r += h.refreshed;
    return r;
  }());
}

TEST_CASE("run edge cases: zero generations and a budget of one population") {
  DeConfig cfg;
  cfg.population = 10;
  cfg.generations = 0;
  auto res = run(cfg, sphere_problem(3), 1);
  CHECK(res.history.size() == 1);
  CHECK(res.evaluations == 10);

  cfg.generations = 50;
  cfg.query_budget = 10;
  res = run(cfg, sphere_problem(3), 1);
  CHECK(res.evaluations == 10);
  CHECK(res.history.size() == 1);

  for (std::size_t budget : {11u, 37u, 100u, 333u}) {
    cfg.query_budget = budget;
    cfg.batch_size = 0;
    std::size_t calls = 0;
    SearchProblem p = sphere_problem(3);
    p.fitness = [&calls](std::span<const double> g, std::span<const std::size_t>, std::uint64_t) {
      ++calls;
      return sphere(g);
    };
    res = run(cfg, p, 2);
    CHECK(calls <= budget);
    CHECK(res.evaluations == calls);
  }
  cfg.query_budget = 5;
  CHECK_THROWS_AS(run(cfg, sphere_problem(3), 1), Error);
}

TEST_CASE("stagnation refreshes the worst part of the population but never the best") {
  DeConfig cfg;
  cfg.population = 10;
  cfg.generations = 40;
  cfg.stagnation_window = 5;
  cfg.batch_size = 0;
  // Flat landscape with a single best point at the origin corner.
  SearchProblem p = sphere_problem(2, 0.0, 1.0);
  p.fitness = [](std::span<const double> g, std::span<const std::size_t>, std::uint64_t) {
    return g[0] == 0.0 && g[1] == 0.0 ? -1.0 : 0.0;
  };
  std::vector<GenerationRecord> seen;
  const auto res = run(cfg, p, 3, [&](const GenerationRecord& r) { seen.push_back(r); });
  CHECK(seen == res.history);
  std::size_t refreshes = 0;
  for (const auto& h : res.history) {
    if (h.refreshed) {
      ++refreshes;
      CHECK(h.refreshed == 3);
    }
  }
  CHECK(refreshes >= 5);
}

TEST_CASE("mini-batches are sorted, distinct and deterministic") {
  const auto a = sample_batch(32, 8, 3, 7);
  CHECK(a.size() == 8);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a == sample_batch(32, 8, 3, 7));
  CHECK_FALSE(a == sample_batch(32, 8, 4, 7));
  CHECK(sample_batch(5, 0, 1, 1).size() == 5);
  CHECK(sample_batch(5, 9, 1, 1).size() == 5);
}

TEST_CASE("batched runs re-score survivors and count it") {
  DeConfig cfg;
  cfg.population = 6;
  cfg.generations = 3;
  cfg.batch_size = 2;
  SearchProblem p = sphere_problem(2);
  p.n_items = 10;
  std::size_t calls = 0;
  p.fitness = [&calls](std::span<const double> g, std::span<const std::size_t> batch, std::uint64_t) {
    ++calls;
    return sphere(g) + 0.01 * static_cast<double>(batch[0]);
  };
  const auto res = run(cfg, p, 5);
  CHECK(res.evaluations == calls);
  CHECK(calls >= 6 + 3 * 6);
}

TEST_CASE("results do not depend on the worker count") {
  DeConfig cfg;
  cfg.population = 12;
  cfg.generations = 15;
  cfg.batch_size = 0;
  const auto one = run(cfg, sphere_problem(4), 9);
  cfg.workers = 4;
  const auto four = run(cfg, sphere_problem(4), 9);
  CHECK(one.best_genome == four.best_genome);
  CHECK(one.history == four.history);
}

TEST_CASE("config validation and JSON") {
  DeConfig cfg;
  cfg.population = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.refresh_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.f_scale = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.population = 30;
  cfg.crossover_rate = {0.1, 0.9};
  const auto back = de_config_from_json(to_json(cfg));
  CHECK(back.population == 30);
  CHECK(back.crossover_rate.hi == 0.9);
  CHECK(to_json(GenerationRecord{2, -1.0, 0.5, 40, 3}).dump() ==
        R"({"best":-1.0,"evals":40,"gen":2,"mean":0.5,"refreshed":3})");
}
