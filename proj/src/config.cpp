#include "ucgp/config.hpp"

#include "ucgp/error.hpp"

#include <fstream>

namespace ucgp {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

nlohmann::json to_json(const PasteConfig& c) {
  return {{"side_ratio", c.side_ratio},
          {"anchor", c.anchor},
          {"ring_ratio", c.ring_ratio},
          {"support_threshold", c.support_threshold},
          {"boundary_upper", c.boundary_upper}};
}

PasteConfig paste_config_from_json(const nlohmann::json& j) {
  PasteConfig c;
  c.side_ratio = j.value("side_ratio", c.side_ratio);
  c.anchor = j.value("anchor", c.anchor);
  c.ring_ratio = j.value("ring_ratio", c.ring_ratio);
  c.support_threshold = j.value("support_threshold", c.support_threshold);
  c.boundary_upper = j.value("boundary_upper", c.boundary_upper);
  c.validate();
  return c;
}

nlohmann::json to_json(const ObjectiveWeights& w) {
  return {{"lambda_topo", w.lambda_topo}, {"lambda_budget", w.lambda_budget}};
}

ObjectiveWeights objective_weights_from_json(const nlohmann::json& j) {
  ObjectiveWeights w;
  w.lambda_topo = j.value("lambda_topo", w.lambda_topo);
  w.lambda_budget = j.value("lambda_budget", w.lambda_budget);
  w.validate();
  return w;
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  if (!j.contains("seed")) throw config_error("config is missing the mandatory 'seed'");
  try {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
    if (j.contains("dataset")) c.dataset = resolve(base_dir, j.at("dataset").get<std::string>());
    if (j.contains("clean")) c.clean = resolve(base_dir, j.at("clean").get<std::string>());
    if (j.contains("reference") && !j.at("reference").is_null())
      c.reference = resolve(base_dir, j.at("reference").get<std::string>());
    if (j.contains("encoder")) c.encoder = j.at("encoder");
    c.k = j.value("k", c.k);
    c.clean_min_prob = j.value("clean_min_prob", c.clean_min_prob);
    if (!(c.clean_min_prob >= 0.0 && c.clean_min_prob < 1.0)) throw config_error("clean_min_prob must be in [0,1)");
    if (j.contains("cgm")) c.setup.cgm = cgm_config_from_json(j.at("cgm"));
    if (j.contains("paste")) c.setup.paste = paste_config_from_json(j.at("paste"));
    if (j.contains("augment")) c.setup.augment = augment_config_from_json(j.at("augment"));
    if (j.contains("objective")) c.setup.weights = objective_weights_from_json(j.at("objective"));
    c.setup.n_eot = j.value("n_eot", c.setup.n_eot);
    if (c.setup.n_eot == 0) throw config_error("n_eot must be >= 1");
    if (j.contains("metade")) c.metade = de_config_from_json(j.at("metade"));
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      for (const auto& d : s.value("datasets", nlohmann::json::array()))
        c.sweep.datasets.push_back(resolve(base_dir, d.get<std::string>()));
      for (const auto& e : s.value("encoders", nlohmann::json::array())) c.sweep.encoders.push_back(e);
    }
    if (c.k == 0) throw config_error("k must be >= 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw missing_input("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path().empty() ? "." : path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {{"seed", c.seed},
                      {"output_dir", c.output_dir.string()},
                      {"dataset", c.dataset_path().string()},
                      {"clean", c.clean_path().string()},
                      {"reference", c.reference_path().string()},
                      {"encoder", c.encoder},
                      {"k", c.k},
                      {"clean_min_prob", c.clean_min_prob},
                      {"n_eot", c.setup.n_eot},
                      {"cgm", to_json(c.setup.cgm)},
                      {"paste", to_json(c.setup.paste)},
                      {"augment", to_json(c.setup.augment)},
                      {"objective", to_json(c.setup.weights)},
                      {"metade", to_json(c.metade)},
                      {"synth", to_json(c.synth)}};
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : c.sweep.datasets) ds.push_back(d.string());
  j["sweep"] = {{"datasets", ds}, {"encoders", c.sweep.encoders}};
  return j;
}

}  // namespace ucgp
