#include "ucgp/commands.hpp"

#include "ucgp/error.hpp"
#include "ucgp/pipeline.hpp"
#include "ucgp/rng.hpp"

#include <fstream>
#include <iostream>

#include "CLI11.hpp"

namespace ucgp {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw missing_input(what + " not found: " + p.string());
}

std::vector<Sample> samples_from(const fs::path& manifest, const char* what) {
  require_file(manifest, what);
  return load_samples(load_dataset(manifest));
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw runtime_error("cannot write " + path.string());
}

std::pair<PatchParams, CgmConfig> patch_for(const RunConfig& cfg, const fs::path& patch_path) {
  require_file(patch_path, "patch file");
  auto loaded = load_patch(patch_path);
  loaded.second.supersample = cfg.setup.cgm.supersample;
  return loaded;
}

// The reference is reused if present, otherwise built from the clean set and saved.
CleanReference reference_for(const RunConfig& cfg) {
  if (fs::exists(cfg.reference_path())) return load_reference(cfg.reference_path());
  if (cfg.reference) throw missing_input("reference not found: " + cfg.reference->string());
  return cmd_stats(cfg);
}

}  // namespace

RunConfig apply_overrides(RunConfig cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) {
    if (*o.workers == 0) throw config_error("--workers must be >= 1");
    cfg.metade.workers = *o.workers;
  }
  if (o.out) {
    // Defaulted paths follow the new output directory.
    cfg.output_dir = *o.out;
  }
  return cfg;
}

SynthOutput cmd_synth(const RunConfig& cfg) {
  return synth_dataset(cfg.synth, cfg.seed, cfg.output_dir / "synth");
}

CleanReference cmd_stats(const RunConfig& cfg) {
  const auto encoder = make_encoder(cfg.encoder);
  require_file(cfg.clean_path(), "clean manifest");
  const Dataset ds = load_dataset(cfg.clean_path());
  auto samples = load_samples(ds);
  const std::size_t loaded = samples.size();
  if (cfg.clean_min_prob > 0.0) std::erase_if(samples, [&](const Sample& s) {
    return category_probability(encoder->class_scores(crop(s.image, s.roi)), ds.category) <= cfg.clean_min_prob;
  });
  if (cfg.k + 1 > samples.size())
    throw config_error("k=" + std::to_string(cfg.k) + " needs at least k+1 clean images, got " +
                       std::to_string(samples.size()) + " of " + std::to_string(loaded) + " after filtering");
  const auto feats = encode_crops(*encoder, samples);
  CleanReference ref = build_reference(std::span<const FeatureVec>(feats), cfg.k);
  if (cfg.reference_path().has_parent_path()) fs::create_directories(cfg.reference_path().parent_path());
  save_reference(ref, cfg.reference_path());
  return ref;
}

OptimizeOutput cmd_optimize(const RunConfig& cfg) {
  cfg.metade.validate();
  const auto encoder = make_encoder(cfg.encoder);
  auto samples = samples_from(cfg.dataset_path(), "dataset manifest");
  CleanReference ref = reference_for(cfg);
  AttackContext ctx(std::move(samples), std::move(ref), cfg.setup, encoder);

  fs::create_directories(cfg.output_dir);
  const auto history_path = cfg.output_dir / "history.jsonl";
  std::ofstream history(history_path);
  if (!history) throw runtime_error("cannot write " + history_path.string());

  OptimizeOutput out;
  out.run = run(cfg.metade, ctx.problem(), cfg.seed,
                [&](const GenerationRecord& r) { history << to_json(r).dump() << '\n'; });
  history.flush();
  out.patch = decode(out.run.best_genome, cfg.setup.cgm);
  out.final_report = ctx.full_report(out.run.best_genome, derive_seed(cfg.seed, 0x46494E414Cull));

  save_patch(out.patch, cfg.setup.cgm, cfg.output_dir / "patch.json");
  nlohmann::json report = to_json(out.final_report);
  report["best_search_fitness"] = out.run.best_fitness;
  report["evaluations"] = out.run.evaluations;
  write_json(cfg.output_dir / "fitness_report.json", report);
  return out;
}

EvaluateOutput cmd_evaluate(const RunConfig& cfg, const fs::path& patch_path) {
  const auto [patch, cgm] = patch_for(cfg, patch_path);
  const auto encoder = make_encoder(cfg.encoder);
  const Dataset ds = [&] {
    require_file(cfg.dataset_path(), "dataset manifest");
    return load_dataset(cfg.dataset_path());
  }();
  const auto samples = load_samples(ds);
  EvaluateOutput out;
  out.outcomes = evaluate_patch(*encoder, samples, patch, cgm, cfg.setup.paste, ds.category, cfg.metade.workers);
  out.summary = summarize(out.outcomes);

  fs::create_directories(cfg.output_dir);
  write_outcomes_csv(out.outcomes, cfg.output_dir / "outcomes.csv");
  nlohmann::json all = nlohmann::json::array();
  for (const auto& o : out.outcomes) all.push_back(to_json(o));
  write_json(cfg.output_dir / "outcomes.json", all);
  write_json(cfg.output_dir / "summary.json", to_json(out.summary));
  return out;
}

fs::path cmd_render(const RunConfig& cfg, const fs::path& patch_path, int side) {
  if (side < 1) throw config_error("--side must be >= 1");
  const auto [patch, cgm] = patch_for(cfg, patch_path);
  const RenderedPatch r = render(patch, cgm, side);
  fs::create_directories(cfg.output_dir);
  const auto path = cfg.output_dir / "patch_alpha.png";
  save_image(IrImage(r.side, r.side, r.alpha), path);
  return path;
}

fs::path cmd_export(const RunConfig& cfg, const fs::path& patch_path, double size_mm) {
  if (!(size_mm > 0)) throw config_error("--size-mm must be positive");
  const auto [patch, cgm] = patch_for(cfg, patch_path);
  fs::create_directories(cfg.output_dir);
  const auto path = cfg.output_dir / "patch.svg";
  export_vector(patch, cgm, path, size_mm);
  return path;
}

std::vector<fs::path> cmd_paste(const RunConfig& cfg, const fs::path& patch_path) {
  const auto [patch, cgm] = patch_for(cfg, patch_path);
  const auto samples = samples_from(cfg.dataset_path(), "dataset manifest");
  const auto dir = cfg.output_dir / "pasted";
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (const auto& s : samples) {
    const auto res = paste(s.image, patch, cgm, s.roi, cfg.setup.paste);
    written.push_back(dir / (s.id + ".png"));
    save_image(res.image, written.back());
  }
  return written;
}

std::vector<SweepCell> cmd_sweep(const RunConfig& cfg, const fs::path& patch_path) {
  const auto [patch, cgm] = patch_for(cfg, patch_path);
  std::vector<fs::path> manifests = cfg.sweep.datasets;
  if (manifests.empty()) manifests.push_back(cfg.dataset_path());
  std::vector<nlohmann::json> specs = cfg.sweep.encoders;
  if (specs.empty()) specs.push_back(cfg.encoder);

  std::vector<SweepDataset> datasets;
  for (const auto& m : manifests) {
    require_file(m, "sweep dataset");
    Dataset ds = load_dataset(m);
    datasets.push_back({m.stem().string(), ds.category, load_samples(ds)});
  }
  // An unreachable encoder becomes a failed column, not a failed sweep.
  std::vector<EncoderHandle> encoders;
  std::vector<std::string> encoder_errors;
  for (const auto& s : specs) {
    try {
      encoders.push_back(make_encoder(s));
      encoder_errors.emplace_back();
    } catch (const std::exception& e) {
      encoders.push_back(nullptr);
      encoder_errors.emplace_back(e.what());
    }
  }
  auto cells = transfer_sweep(patch, cgm, cfg.setup.paste, datasets, encoders, cfg.metade.workers);
  for (auto& c : cells)
    if (!encoder_errors[c.encoder].empty()) c.error = encoder_errors[c.encoder];

  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell = {{"dataset", datasets[c.dataset].name}, {"encoder", specs[c.encoder]}};
    if (c.summary) cell["summary"] = to_json(*c.summary);
    if (!c.error.empty()) cell["error"] = c.error;
    j.push_back(cell);
  }
  write_json(cfg.output_dir / "sweep.json", j);
  return cells;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Curved-grid mesh patch attacks on infrared encoders"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  std::string patch_path;
  int side = 256;
  double size_mm = 200.0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config JSON")->required();
    sub->add_option("--seed", ov.seed, "master seed (overrides config)");
    sub->add_option("--workers", ov.workers, "worker threads");
    sub->add_option("--out", ov.out, "output directory (overrides config)");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* stats = app.add_subcommand("stats", "build the clean reference");
  auto* optimize = app.add_subcommand("optimize", "search for a patch");
  auto* evaluate = app.add_subcommand("evaluate", "score a patch on the dataset");
  auto* render_cmd = app.add_subcommand("render", "rasterize a patch alpha mask");
  auto* export_cmd = app.add_subcommand("export", "write a fabrication SVG");
  auto* paste_cmd = app.add_subcommand("paste", "paste a patch onto the dataset images");
  auto* sweep = app.add_subcommand("sweep", "transfer sweep over datasets and encoders");
  for (auto* s : {synth, stats, optimize, evaluate, render_cmd, export_cmd, paste_cmd, sweep}) common(s);
  for (auto* s : {evaluate, render_cmd, export_cmd, paste_cmd, sweep})
    s->add_option("--patch", patch_path, "patch JSON")->required();
  render_cmd->add_option("--side", side, "output side in pixels");
  export_cmd->add_option("--size-mm", size_mm, "physical side in millimetres");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = apply_overrides(load_run_config(config_path), ov);
    if (synth->parsed()) {
      const auto out = cmd_synth(cfg);
      std::cout << out.dataset_manifest.string() << '\n' << out.clean_manifest.string() << '\n';
    } else if (stats->parsed()) {
      const auto ref = cmd_stats(cfg);
      std::cout << "reference: n=" << ref.features.size() << " d=" << ref.dim() << " k=" << ref.k
                << " sigma=" << ref.kernel_scale << '\n';
    } else if (optimize->parsed()) {
      const auto out = cmd_optimize(cfg);
      std::cout << "best fitness " << out.run.best_fitness << " after " << out.run.evaluations << " evaluations\n";
    } else if (evaluate->parsed()) {
      const auto out = cmd_evaluate(cfg, patch_path);
      std::cout << to_json(out.summary).dump() << '\n';
    } else if (render_cmd->parsed()) {
      std::cout << cmd_render(cfg, patch_path, side).string() << '\n';
    } else if (export_cmd->parsed()) {
      std::cout << cmd_export(cfg, patch_path, size_mm).string() << '\n';
    } else if (paste_cmd->parsed()) {
      std::cout << cmd_paste(cfg, patch_path).size() << " images written\n";
    } else if (sweep->parsed()) {
      const auto cells = cmd_sweep(cfg, patch_path);
      std::cout << cells.size() << " cells\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::config: return 1;
      case ErrorKind::missing_input: return 2;
      default: return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace ucgp
