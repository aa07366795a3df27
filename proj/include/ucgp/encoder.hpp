#pragma once

#include "ucgp/core.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct ClassScores {
  std::vector<std::string> labels;
  std::vector<double> scores;  // aligned with labels

  double score(const std::string& label) const;
  /// Index of the highest score; ties go to the earlier label.
  std::size_t top1() const;
};

/// Softmax probability of `label` under the scores; throws if the label is unknown.
double category_probability(const ClassScores& scores, const std::string& label);

/// The feature oracle f(.): normalized features plus optional class scores.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual const std::vector<std::string>& class_labels() const = 0;

  virtual FeatureVec encode(const IrImage& img) const = 0;
  /// Element i equals encode(imgs[i]); a failure anywhere fails the whole batch.
  virtual std::vector<FeatureVec> encode_batch(std::span<const IrImage> imgs) const;
  virtual ClassScores class_scores(const IrImage& img) const = 0;
};

using EncoderHandle = std::shared_ptr<const Encoder>;

std::vector<std::string> default_labels();

/// Deterministic offline encoder: area-resize to 32x32, 8x8 intensity pools and
/// 8x8 horizontal/vertical gradient-energy pools (192 raw values), a fixed
/// seeded Gaussian projection to `dim`, then L2 normalization.
class ToyEncoder final : public Encoder {
 public:
  static constexpr int kResize = 32;
  static constexpr int kPool = 8;
  static constexpr std::size_t kRawDim = 3 * kPool * kPool;
  static constexpr double kLogitScale = 100.0;
  static constexpr std::size_t kEnsemble = 16;  // sketches averaged per class prototype

  explicit ToyEncoder(std::uint64_t seed = 7, std::vector<std::string> labels = default_labels(),
                      std::size_t dim = 32);

  std::string kind() const override { return "toy"; }
  std::size_t feature_dim() const override { return dim_; }
  const std::vector<std::string>& class_labels() const override { return labels_; }

  FeatureVec encode(const IrImage& img) const override;
  ClassScores class_scores(const IrImage& img) const override;

  /// Raw pooled descriptor before projection.
  Eigen::VectorXd raw_features(const IrImage& img) const;
  const FeatureVec& prototype(std::size_t label) const { return prototypes_.at(label); }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
  std::vector<std::string> labels_;
  Eigen::MatrixXd projection_;  // dim x kRawDim
  std::vector<FeatureVec> prototypes_;
};

/// Client for the remote encoder wire protocol:
///   GET  /info   -> {"feature_dim": int, "model": str}
///   POST /embed  {"id", "image_png_b64"} -> {"id", "dim", "values"}
///   POST /scores {"id", "image_png_b64", "labels"} -> {"id", "scores"}
class RemoteEncoder final : public Encoder {
 public:
  /// `url` like "http://127.0.0.1:8080". Queries /info once at construction.
  RemoteEncoder(std::string url, std::vector<std::string> labels = default_labels(), std::size_t max_in_flight = 8,
                double timeout_s = 30.0);

  std::string kind() const override { return "remote"; }
  std::size_t feature_dim() const override { return dim_; }
  const std::vector<std::string>& class_labels() const override { return labels_; }
  const std::string& model() const noexcept { return model_; }

  FeatureVec encode(const IrImage& img) const override;
  std::vector<FeatureVec> encode_batch(std::span<const IrImage> imgs) const override;
  ClassScores class_scores(const IrImage& img) const override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  FeatureVec parse_embedding(const nlohmann::json& reply, const std::string& id) const;
  std::string next_id() const;

  std::string url_;
  std::vector<std::string> labels_;
  std::size_t max_in_flight_;
  double timeout_s_;
  std::size_t dim_ = 0;
  std::string model_;
};

std::string base64_png(const IrImage& img);

/// {"kind": "toy", "seed": u64, "dim": n, "labels": [...]} or {"kind": "remote", "url": str, "labels": [...]}.
EncoderHandle make_encoder(const nlohmann::json& spec);

}  // namespace ucgp
