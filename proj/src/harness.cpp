#include "ucgp/harness.hpp"

#include "ucgp/error.hpp"
#include "ucgp/parallel.hpp"

#include <algorithm>
#include <fstream>

namespace ucgp {

AttackOutcome make_outcome(std::string sample_id, ClassScores clean, ClassScores adv, const std::string& target) {
  if (clean.labels != adv.labels) throw runtime_error("clean and adversarial label lists differ");
  if (std::find(clean.labels.begin(), clean.labels.end(), target) == clean.labels.end())
    throw config_error("class labels do not include the target category '" + target + "'");
  AttackOutcome o;
  o.sample_id = std::move(sample_id);
  o.clean_top1 = clean.labels[clean.top1()];
  o.adv_top1 = adv.labels[adv.top1()];
  o.target = target;
  o.success = o.adv_top1 != target;
  o.clean_scores = std::move(clean);
  o.adv_scores = std::move(adv);
  return o;
}

AttackOutcome eval_sample(const Encoder& encoder, const Sample& sample, const RenderedPatch& patch,
                          const PasteConfig& paste_cfg, const std::string& target) {
  const PasteResult pasted = paste(sample.image, patch, sample.roi, paste_cfg);
  return make_outcome(sample.id, encoder.class_scores(crop(sample.image, sample.roi)),
                      encoder.class_scores(crop(pasted.image, sample.roi)), target);
}

AttackOutcome eval_sample(const Encoder& encoder, const Sample& sample, const PatchParams& p, const CgmConfig& cgm,
                          const PasteConfig& paste_cfg, const std::string& target) {
  return eval_sample(encoder, sample, render(p, cgm, patch_side(sample.roi, paste_cfg)), paste_cfg, target);
}

std::size_t strongest_other(const ClassScores& scores, const std::string& target) {
  if (scores.labels.size() < 2) throw runtime_error("need at least 2 labels");
  std::size_t best = scores.labels.size();
  for (std::size_t i = 0; i < scores.labels.size(); ++i) {
    if (scores.labels[i] == target) continue;
    if (best == scores.labels.size() || scores.scores[i] > scores.scores[best]) best = i;
  }
  return best;
}

double target_promotion(const AttackOutcome& o) {
  const std::size_t c = strongest_other(o.adv_scores, o.target);
  return o.adv_scores.scores[c] - o.clean_scores.scores[c];
}

double adv_margin(const AttackOutcome& o) {
  const std::size_t c = strongest_other(o.adv_scores, o.target);
  return o.adv_scores.scores[c] - o.adv_scores.score(o.target);
}

MetricSummary summarize(std::span<const AttackOutcome> outcomes) {
  if (outcomes.empty()) throw runtime_error("cannot summarize zero outcomes");
  MetricSummary m;
  m.count = outcomes.size();
  std::size_t success = 0, clean_ok = 0, adv_ok = 0;
  double promo = 0.0, margin = 0.0;
  for (const auto& o : outcomes) {
    success += o.success;
    clean_ok += o.clean_top1 == o.target;
    adv_ok += o.adv_top1 == o.target;
    promo += target_promotion(o);
    margin += adv_margin(o);
  }
  const double n = static_cast<double>(outcomes.size());
  m.asr = 100.0 * static_cast<double>(success) / n;
  m.clean_accuracy = static_cast<double>(clean_ok) / n;
  m.adv_accuracy = static_cast<double>(adv_ok) / n;
  if (m.clean_accuracy > 0.0) m.rel_drop = 100.0 * (m.clean_accuracy - m.adv_accuracy) / m.clean_accuracy;
  m.target_promotion = promo / n;
  m.adv_margin = margin / n;
  return m;
}

std::vector<AttackOutcome> evaluate_patch(const Encoder& encoder, std::span<const Sample> samples, const PatchParams& p,
                                          const CgmConfig& cgm, const PasteConfig& paste_cfg,
                                          const std::string& target, std::size_t workers) {
  std::vector<AttackOutcome> out(samples.size());
  parallel_for(samples.size(), workers,
               [&](std::size_t i) { out[i] = eval_sample(encoder, samples[i], p, cgm, paste_cfg, target); });
  return out;
}

std::vector<SweepCell> transfer_sweep(const PatchParams& p, const CgmConfig& cgm, const PasteConfig& paste_cfg,
                                      std::span<const SweepDataset> datasets, std::span<const EncoderHandle> encoders,
                                      std::size_t workers) {
  std::vector<SweepCell> cells(datasets.size() * encoders.size());
  parallel_for(cells.size(), workers, [&](std::size_t k) {
    SweepCell& cell = cells[k];
    cell.dataset = k / encoders.size();
    cell.encoder = k % encoders.size();
    try {
      const auto& ds = datasets[cell.dataset];
      if (!encoders[cell.encoder]) throw runtime_error("encoder handle is empty");
      const auto outcomes = evaluate_patch(*encoders[cell.encoder], ds.samples, p, cgm, paste_cfg, ds.category);
      cell.summary = summarize(outcomes);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  return cells;
}

nlohmann::json to_json(const MetricSummary& m) {
  nlohmann::json j{{"count", m.count},
                   {"asr", m.asr},
                   {"clean_accuracy", m.clean_accuracy},
                   {"adv_accuracy", m.adv_accuracy},
                   {"target_promotion", m.target_promotion},
                   {"adv_margin", m.adv_margin}};
  j["rel_drop"] = m.rel_drop ? nlohmann::json(*m.rel_drop) : nlohmann::json("undefined");
  return j;
}

nlohmann::json to_json(const AttackOutcome& o) {
  return {{"sample_id", o.sample_id},
          {"clean_top1", o.clean_top1},
          {"adv_top1", o.adv_top1},
          {"success", o.success},
          {"ds_target", target_promotion(o)},
          {"m_adv", adv_margin(o)},
          {"labels", o.clean_scores.labels},
          {"clean_scores", o.clean_scores.scores},
          {"adv_scores", o.adv_scores.scores}};
}

void write_outcomes_csv(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "sample_id,clean_top1,adv_top1,success,ds_target,m_adv\n";
  for (const auto& o : outcomes)
    out << o.sample_id << ',' << o.clean_top1 << ',' << o.adv_top1 << ',' << (o.success ? 1 : 0) << ','
        << target_promotion(o) << ',' << adv_margin(o) << '\n';
}

}  // namespace ucgp
