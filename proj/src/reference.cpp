#include "ucgp/reference.hpp"

#include "ucgp/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ucgp {

namespace {

void fix_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }
}

}  // namespace

double kernel_scale(std::span<const Eigen::VectorXd> features) {
  const std::size_t n = features.size();
  if (n < 2) throw runtime_error("kernel scale needs at least 2 features");
  const std::size_t rank = std::min(kKernelNeighbor, n - 1);
  std::vector<double> kth(n);
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d[m++] = (features[i] - features[j]).norm();
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank - 1), d.end());
    kth[i] = d[rank - 1];
  }
  std::sort(kth.begin(), kth.end());
  return n % 2 ? kth[n / 2] : 0.5 * (kth[n / 2 - 1] + kth[n / 2]);
}

Eigen::MatrixXd neighborhood_distribution(std::span<const Eigen::VectorXd> features, double scale) {
  const auto n = static_cast<Eigen::Index>(features.size());
  if (n < 2) throw runtime_error("neighborhood distribution needs at least 2 points");
  if (!(scale > 0.0)) throw runtime_error("kernel scale must be positive");
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n, n);
  double min_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (features[static_cast<std::size_t>(i)] - features[static_cast<std::size_t>(j)]).squaredNorm();
      d2(i, j) = d2(j, i) = v;
      min_d2 = std::min(min_d2, v);
    }
  // Shifting every exponent by the smallest distance cancels in the
  // normalization and keeps the largest affinity at exactly 1 (no underflow).
  const double inv = 1.0 / (2.0 * scale * scale);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = std::exp(-(d2(i, j) - min_d2) * inv);
      p(i, j) = p(j, i) = a;
      total += 2.0 * a;
    }
  return p / total;
}

CleanReference build_reference(std::span<const Eigen::VectorXd> features, std::size_t k) {
  const std::size_t n = features.size();
  if (k < 1) throw config_error("subspace rank k must be >= 1");
  if (n < k + 1)
    throw config_error("reference needs at least k+1 = " + std::to_string(k + 1) + " features, got " + std::to_string(n));
  const auto d = features.front().size();
  for (const auto& f : features)
    if (f.size() != d) throw runtime_error("reference features differ in dimension");
  if (static_cast<Eigen::Index>(k) > d) throw config_error("subspace rank k exceeds the feature dimension");

  CleanReference ref;
  ref.k = k;
  ref.features.assign(features.begin(), features.end());
  ref.mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) ref.mean += f;
  ref.mean /= static_cast<double>(n);

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) centered.row(static_cast<Eigen::Index>(i)) = (features[i] - ref.mean).transpose();
  if (centered.cwiseAbs().maxCoeff() <= 1e-12) throw runtime_error("degenerate reference: all features identical");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  ref.basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  fix_signs(ref.basis);

  ref.kernel_scale = kernel_scale(features);
  if (!(ref.kernel_scale > 0.0)) {
    // Duplicate-heavy sets: fall back to the smallest nonzero pairwise distance.
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = (features[i] - features[j]).norm();
        if (v > 0.0) smallest = std::min(smallest, v);
      }
    ref.kernel_scale = smallest;
  }
  ref.p_matrix = neighborhood_distribution(features, ref.kernel_scale);
  return ref;
}

CleanReference build_reference(std::span<const FeatureVec> features, std::size_t k) {
  std::vector<Eigen::VectorXd> raw;
  raw.reserve(features.size());
  for (const auto& f : features) raw.push_back(f.values());
  return build_reference(std::span<const Eigen::VectorXd>(raw), k);
}

double subspace_residual(const CleanReference& ref, const Eigen::VectorXd& z) {
  if (z.size() != ref.mean.size())
    throw runtime_error("feature dimension " + std::to_string(z.size()) + " != reference dimension " +
                        std::to_string(ref.mean.size()));
  const Eigen::VectorXd c = z - ref.mean;
  const Eigen::VectorXd r = c - ref.basis * (ref.basis.transpose() * c);
  return r.squaredNorm();
}

nlohmann::json to_json(const CleanReference& ref) {
  nlohmann::json j;
  j["k"] = ref.k;
  j["dim"] = ref.dim();
  j["kernel_scale"] = ref.kernel_scale;
  j["mean"] = std::vector<double>(ref.mean.data(), ref.mean.data() + ref.mean.size());
  std::vector<double> basis;
  basis.reserve(static_cast<std::size_t>(ref.basis.size()));
  for (Eigen::Index r = 0; r < ref.basis.rows(); ++r)
    for (Eigen::Index c = 0; c < ref.basis.cols(); ++c) basis.push_back(ref.basis(r, c));
  j["basis"] = basis;
  j["features"] = nlohmann::json::array();
  for (const auto& f : ref.features) j["features"].push_back(std::vector<double>(f.data(), f.data() + f.size()));
  return j;
}

CleanReference reference_from_json(const nlohmann::json& j) {
  try {
    CleanReference ref;
    ref.k = j.at("k").get<std::size_t>();
    ref.kernel_scale = j.at("kernel_scale").get<double>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    ref.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    const auto basis = j.at("basis").get<std::vector<double>>();
    const auto k = static_cast<Eigen::Index>(ref.k);
    if (basis.size() != static_cast<std::size_t>(d * k)) throw config_error("reference basis has the wrong size");
    ref.basis.resize(d, k);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < k; ++c) ref.basis(r, c) = basis[static_cast<std::size_t>(r * k + c)];
    for (const auto& f : j.at("features")) {
      const auto v = f.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != d) throw config_error("reference feature has the wrong dimension");
      ref.features.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), d));
    }
    const Eigen::MatrixXd gram = ref.basis.transpose() * ref.basis;
    if ((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-6)
      throw config_error("reference basis is not orthonormal");
    if (!(ref.kernel_scale > 0.0)) throw config_error("reference kernel_scale must be positive");
    ref.p_matrix = neighborhood_distribution(ref.features, ref.kernel_scale);
    return ref;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed reference JSON: ") + e.what());
  }
}

void save_reference(const CleanReference& ref, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw runtime_error("cannot write " + path.string());
  out << to_json(ref).dump(1) << '\n';
}

CleanReference load_reference(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw missing_input("reference file not found: " + path.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed reference file " + path.string() + ": " + e.what());
  }
  return reference_from_json(j);
}

}  // namespace ucgp
