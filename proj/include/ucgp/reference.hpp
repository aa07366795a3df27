#pragma once

#include "ucgp/core.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace ucgp {

/// Clean-category statistics the attack pushes away from.
struct CleanReference {
  Eigen::VectorXd mean;   // μ
  Eigen::MatrixXd basis;  // d x k, orthonormal columns (U_k)
  std::size_t k = 0;
  double kernel_scale = 0;   // σ_graph, frozen for every later Q
  Eigen::MatrixXd p_matrix;  // n x n clean neighborhood distribution
  std::vector<Eigen::VectorXd> features;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Nearest-neighbor rank used for the kernel scale (median distance to it).
inline constexpr std::size_t kKernelNeighbor = 5;

CleanReference build_reference(std::span<const FeatureVec> features, std::size_t k);
CleanReference build_reference(std::span<const Eigen::VectorXd> features, std::size_t k);

/// ‖(I − U_k U_kᵀ)(z − μ)‖².
double subspace_residual(const CleanReference& ref, const Eigen::VectorXd& z);

/// Gaussian affinities exp(−‖z_i − z_j‖² / 2σ²) over i ≠ j, normalized to sum 1.
Eigen::MatrixXd neighborhood_distribution(std::span<const Eigen::VectorXd> features, double kernel_scale);

/// Median over points of the distance to their min(5, n−1)-th nearest neighbor.
double kernel_scale(std::span<const Eigen::VectorXd> features);

nlohmann::json to_json(const CleanReference& ref);
CleanReference reference_from_json(const nlohmann::json& j);
void save_reference(const CleanReference& ref, const std::filesystem::path& path);
CleanReference load_reference(const std::filesystem::path& path);

}  // namespace ucgp
