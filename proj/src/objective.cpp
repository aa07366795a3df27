#include "ucgp/objective.hpp"

#include "ucgp/error.hpp"
#include "ucgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ucgp {

void ObjectiveWeights::validate() const {
  if (!(lambda_topo >= 0.0) || !(lambda_budget >= 0.0)) throw config_error("objective weights must be >= 0");
}

double loss_subspace(const CleanReference& ref, std::span<const Eigen::VectorXd> adv) {
  if (adv.empty()) throw runtime_error("loss_subspace needs at least one feature");
  double total = 0.0;
  for (const auto& z : adv) total += subspace_residual(ref, z);
  return -total / static_cast<double>(adv.size());
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw runtime_error("KL operands differ in shape");
  constexpr double kFloor = 1e-12;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      // Same floor on both sides, so entries that agree contribute exactly 0.
      kl += pij * std::log(std::max(pij, kFloor) / std::max(q(i, j), kFloor));
    }
  // KL is non-negative; anything below is floor rounding on far-apart points.
  return std::max(kl, 0.0);
}

double loss_topology(const CleanReference& ref, std::span<const Eigen::VectorXd> adv) {
  if (adv.size() != ref.features.size())
    throw runtime_error("topology term needs " + std::to_string(ref.features.size()) + " adversarial features, got " +
                        std::to_string(adv.size()));
  return -kl_divergence(ref.p_matrix, neighborhood_distribution(adv, ref.kernel_scale));
}

double loss_topology(std::span<const Eigen::VectorXd> clean, std::span<const Eigen::VectorXd> adv, double scale) {
  if (clean.size() != adv.size()) throw runtime_error("clean and adversarial feature counts differ");
  return -kl_divergence(neighborhood_distribution(clean, scale), neighborhood_distribution(adv, scale));
}

BudgetTerms loss_budget(const PasteResult& r) {
  const ContextStats s = context_stats(r);
  BudgetTerms b;
  b.therm = (s.mu_alpha - s.mu_beta) * (s.mu_alpha - s.mu_beta) +
            (s.sigma_alpha - s.sigma_beta) * (s.sigma_alpha - s.sigma_beta);
  b.edge = std::max(0.0, s.grad_boundary - s.grad_ring);
  const double coverage = s.alpha_sum / r.roi.area();
  b.area = coverage * coverage;
  return b;
}

BudgetTerms loss_budget_or_area(const PasteResult& r) {
  if (has_context(r)) return loss_budget(r);
  double sum = 0.0;
  for (double a : r.alpha_full) sum += a;
  const double coverage = sum / r.roi.area();
  return BudgetTerms{0.0, 0.0, coverage * coverage};
}

std::uint64_t eot_seed(std::uint64_t seed, std::size_t sample_index) noexcept {
  return derive_seed(seed, 0x454F54ull, sample_index);
}

namespace {

std::vector<IrImage> eot_views(const IrImage& roi_crop, const AttackSetup& setup, std::uint64_t first_seed) {
  std::vector<IrImage> views;
  views.reserve(setup.n_eot);
  for (std::size_t i = 0; i < setup.n_eot; ++i) views.push_back(apply(sample_transform(setup.augment, first_seed + i), roi_crop));
  return views;
}

}  // namespace

std::vector<Eigen::VectorXd> clean_eot_features(std::span<const Sample> batch, const AttackSetup& setup,
                                                const Encoder& encoder, std::uint64_t seed) {
  if (setup.n_eot == 0) throw config_error("n_eot must be >= 1");
  std::vector<Eigen::VectorXd> out;
  out.reserve(batch.size());
  for (const auto& s : batch) {
    const auto views = eot_views(crop(s.image, s.roi), setup, eot_seed(seed, s.index));
    const auto feats = encoder.encode_batch(views);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(encoder.feature_dim()));
    for (const auto& f : feats) mean += f.values();
    out.push_back(mean / static_cast<double>(feats.size()));
  }
  return out;
}

FitnessReport evaluate_candidate(std::span<const double> genome, std::span<const Sample> batch,
                                 std::span<const Eigen::VectorXd> clean_features, const CleanReference& ref,
                                 const AttackSetup& setup, const Encoder& encoder, std::uint64_t seed) {
  if (batch.empty()) throw runtime_error("evaluation batch is empty");
  if (clean_features.size() != batch.size()) throw runtime_error("clean feature count does not match the batch");
  if (setup.n_eot == 0) throw config_error("n_eot must be >= 1");
  setup.weights.validate();
  const PatchParams params = decode(genome, setup.cgm);

  std::map<int, RenderedPatch> rendered;  // by patch side
  FitnessReport rep;
  rep.per_sample_residuals.reserve(batch.size() * setup.n_eot);
  std::vector<Eigen::VectorXd> adv_means;
  adv_means.reserve(batch.size());
  BudgetTerms budget_sum;
  double residual_sum = 0.0;

  for (const auto& s : batch) {
    const int side = patch_side(s.roi, setup.paste);
    auto it = rendered.find(side);
    if (it == rendered.end()) it = rendered.emplace(side, render(params, setup.cgm, side)).first;
    const PasteResult pasted = paste(s.image, it->second, s.roi, setup.paste);

    const BudgetTerms b = loss_budget_or_area(pasted);
    budget_sum.therm += b.therm;
    budget_sum.edge += b.edge;
    budget_sum.area += b.area;

    const auto views = eot_views(crop(pasted.image, s.roi), setup, eot_seed(seed, s.index));
    const auto feats = encoder.encode_batch(views);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(encoder.feature_dim()));
    for (const auto& f : feats) {
      const double r = subspace_residual(ref, f.values());
      rep.per_sample_residuals.push_back(r);
      residual_sum += r;
      mean += f.values();
    }
    adv_means.push_back(mean / static_cast<double>(feats.size()));
  }

  const double nb = static_cast<double>(batch.size());
  rep.l_subspace = -residual_sum / static_cast<double>(rep.per_sample_residuals.size());
  rep.l_topo = batch.size() >= 2 ? loss_topology(clean_features, adv_means, ref.kernel_scale) : 0.0;
  rep.budget = {budget_sum.therm / nb, budget_sum.edge / nb, budget_sum.area / nb};
  rep.l_budget = rep.budget.total();
  rep.total = rep.l_subspace + setup.weights.lambda_topo * rep.l_topo + setup.weights.lambda_budget * rep.l_budget;
  return rep;
}

FitnessReport evaluate_candidate(std::span<const double> genome, std::span<const Sample> batch,
                                 const CleanReference& ref, const AttackSetup& setup, const Encoder& encoder,
                                 std::uint64_t seed) {
  const auto clean = clean_eot_features(batch, setup, encoder, seed);
  return evaluate_candidate(genome, batch, clean, ref, setup, encoder, seed);
}

nlohmann::json to_json(const FitnessReport& r) {
  return {{"l_subspace", r.l_subspace},
          {"l_topo", r.l_topo},
          {"l_budget", r.l_budget},
          {"budget", {{"therm", r.budget.therm}, {"edge", r.budget.edge}, {"area", r.budget.area}}},
          {"total", r.total},
          {"per_sample_residuals", r.per_sample_residuals}};
}

}  // namespace ucgp
