#include "ucgp/cgm.hpp"
#include "ucgp/commands.hpp"
#include "ucgp/config.hpp"
#include "ucgp/encoder.hpp"
#include "ucgp/error.hpp"
#include "ucgp/harness.hpp"
#include "ucgp/metade.hpp"
#include "ucgp/objective.hpp"
#include "ucgp/paste.hpp"
#include "ucgp/reference.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ucgp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

IrImage to_image(const Array& a) {
  if (a.ndim() != 2) throw config_error("image must be a 2-D array (height, width)");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return IrImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const IrImage& img) {
  Array out({img.height(), img.width()});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

Array square(const std::vector<double>& v, int side) {
  Array out({side, side});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Roi to_roi(const std::array<int, 4>& r) { return Roi{r[0], r[1], r[2], r[3]}; }

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

CgmConfig cgm_from(const std::string& j) { return j.empty() ? CgmConfig{} : cgm_config_from_json(nlohmann::json::parse(j)); }
PasteConfig paste_from(const std::string& j) {
  return j.empty() ? PasteConfig{} : paste_config_from_json(nlohmann::json::parse(j));
}

std::vector<Eigen::VectorXd> rows(const Eigen::MatrixXd& m) {
  std::vector<Eigen::VectorXd> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

RunConfig run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed,
                     std::optional<std::filesystem::path> out) {
  return apply_overrides(load_run_config(path), Overrides{seed, std::nullopt, std::move(out)});
}

}  // namespace

PYBIND11_MODULE(_ucgp, m) {
  m.doc() = "Curved-grid mesh patch attacks on infrared encoders";
  py::register_exception<Error>(m, "UcgpError", PyExc_RuntimeError);

  // patch geometry
  m.def("genome_dim", [](const std::string& cgm) { return genome_dim(cgm_from(cgm)); }, py::arg("cgm") = "");
  m.def(
      "render",
      [](const std::vector<double>& genome, int side, const std::string& cgm) {
        const CgmConfig cfg = cgm_from(cgm);
        const auto r = render(decode(genome, cfg), cfg, side);
        return py::make_tuple(square(r.alpha, r.side), square(r.intensity, r.side));
      },
      py::arg("genome"), py::arg("side"), py::arg("cgm") = "", "Returns (alpha, intensity) arrays.");
  m.def(
      "topology_valid",
      [](const std::vector<double>& genome, const std::string& cgm) {
        const CgmConfig cfg = cgm_from(cgm);
        return check_topology(decode(genome, cfg), cfg) == Topology::valid;
      },
      py::arg("genome"), py::arg("cgm") = "");
  m.def(
      "to_svg",
      [](const std::vector<double>& genome, double size_mm, const std::string& cgm) {
        const CgmConfig cfg = cgm_from(cgm);
        return to_svg(decode(genome, cfg), cfg, size_mm);
      },
      py::arg("genome"), py::arg("size_mm") = 100.0, py::arg("cgm") = "");
  m.def(
      "paste",
      [](const Array& image, const std::vector<double>& genome, const std::array<int, 4>& roi, const std::string& cgm,
         const std::string& paste_cfg) {
        const CgmConfig cfg = cgm_from(cgm);
        const PasteConfig pc = paste_from(paste_cfg);
        const auto r = paste(to_image(image), decode(genome, cfg), cfg, to_roi(roi), pc);
        py::dict budget;
        if (has_context(r)) {
          const auto b = loss_budget(r);
          budget["therm"] = b.therm;
          budget["edge"] = b.edge;
          budget["area"] = b.area;
        }
        return py::make_tuple(to_array(r.image), budget);
      },
      py::arg("image"), py::arg("genome"), py::arg("roi"), py::arg("cgm") = "", py::arg("paste") = "",
      "Returns (pasted image, stealth terms or {} when the patch has no support). roi is (x0, y0, w, h).");

  // encoder
  py::class_<ToyEncoder, std::shared_ptr<ToyEncoder>>(m, "ToyEncoder")
      .def(py::init<std::uint64_t, std::vector<std::string>, std::size_t>(), py::arg("seed") = 7,
           py::arg("labels") = default_labels(), py::arg("dim") = 32)
      .def_property_readonly("feature_dim", &ToyEncoder::feature_dim)
      .def_property_readonly("labels", &ToyEncoder::class_labels)
      .def("encode", [](const ToyEncoder& e, const Array& img) { return e.encode(to_image(img)).values(); })
      .def("scores", [](const ToyEncoder& e, const Array& img) {
        const auto s = e.class_scores(to_image(img));
        py::dict out;
        for (std::size_t i = 0; i < s.labels.size(); ++i) out[py::str(s.labels[i])] = s.scores[i];
        return out;
      });

  // statistics and losses
  py::class_<CleanReference>(m, "CleanReference")
      .def_readonly("mean", &CleanReference::mean)
      .def_readonly("basis", &CleanReference::basis)
      .def_readonly("k", &CleanReference::k)
      .def_readonly("kernel_scale", &CleanReference::kernel_scale)
      .def_readonly("p_matrix", &CleanReference::p_matrix)
      .def("residual", [](const CleanReference& r, const Eigen::VectorXd& z) { return subspace_residual(r, z); })
      .def("save", [](const CleanReference& r, const std::filesystem::path& p) { save_reference(r, p); });
  m.def(
      "build_reference",
      [](const Eigen::MatrixXd& features, std::size_t k) {
        const auto z = rows(features);
        return build_reference(std::span<const Eigen::VectorXd>(z), k);
      },
      py::arg("features"), py::arg("k"), "features: (n, d) array, one row per clean sample.");
  m.def("load_reference", [](const std::filesystem::path& p) { return load_reference(p); });
  m.def(
      "loss_topology",
      [](const Eigen::MatrixXd& clean, const Eigen::MatrixXd& adv, double kernel_scale) {
        const auto c = rows(clean), a = rows(adv);
        return loss_topology(std::span<const Eigen::VectorXd>(c), std::span<const Eigen::VectorXd>(a), kernel_scale);
      },
      py::arg("clean"), py::arg("adv"), py::arg("kernel_scale"));

  // black-box search
  m.def(
      "minimize",
      [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& lower,
         const std::vector<double>& upper, std::size_t population, std::size_t generations, std::uint64_t seed,
         std::size_t query_budget) {
        if (lower.size() != upper.size()) throw config_error("lower and upper bounds differ in length");
        DeConfig cfg;
        cfg.population = population;
        cfg.generations = generations;
        cfg.query_budget = query_budget;
        cfg.batch_size = 0;
        SearchProblem p;
        p.dim = lower.size();
        p.bounds = {lower, upper};
        p.fitness = [&f](std::span<const double> g, std::span<const std::size_t>, std::uint64_t) {
          return f(std::vector<double>(g.begin(), g.end()));
        };
        const auto r = run(cfg, p, seed);
        py::list history;
        for (const auto& h : r.history) history.append(dump(to_json(h)));
        return py::make_tuple(r.best_genome, r.best_fitness, r.evaluations, history);
      },
      py::arg("f"), py::arg("lower"), py::arg("upper"), py::arg("population") = 20, py::arg("generations") = 100,
      py::arg("seed") = 0, py::arg("query_budget") = 0,
      "Self-adaptive differential evolution. Returns (best, fitness, evaluations, history JSON lines).");

  // pipeline commands; results come back as JSON text
  m.def(
      "cmd_synth",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) {
        const auto r = cmd_synth(run_config(config, seed, out));
        return py::make_tuple(r.dataset_manifest, r.clean_manifest);
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none());
  m.def(
      "cmd_stats",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) { return cmd_stats(run_config(config, seed, out)); },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none());
  m.def(
      "cmd_optimize",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) {
        py::gil_scoped_release release;
        const auto r = cmd_optimize(run_config(config, seed, out));
        return dump({{"best_fitness", r.run.best_fitness},
                     {"evaluations", r.run.evaluations},
                     {"genome", r.run.best_genome},
                     {"report", to_json(r.final_report)}});
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none());
  m.def(
      "cmd_evaluate",
      [](const std::filesystem::path& config, const std::filesystem::path& patch, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) {
        py::gil_scoped_release release;
        return dump(to_json(cmd_evaluate(run_config(config, seed, out), patch).summary));
      },
      py::arg("config"), py::arg("patch"), py::arg("seed") = py::none(), py::arg("out") = py::none());
  m.def(
      "cmd_export",
      [](const std::filesystem::path& config, const std::filesystem::path& patch, double size_mm,
         std::optional<std::filesystem::path> out) {
        return cmd_export(run_config(config, std::nullopt, out), patch, size_mm);
      },
      py::arg("config"), py::arg("patch"), py::arg("size_mm") = 200.0, py::arg("out") = py::none());
}
