#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ucgp {

/// Single-channel infrared intensity image, row-major, values in [0,1].
class IrImage {
 public:
  IrImage() = default;
  IrImage(int width, int height, double fill = 0.0);
  /// Takes ownership of `values`; throws if the size or range is wrong.
  IrImage(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
  double& operator()(int x, int y) noexcept { return values_[index(x, y)]; }

  /// Edge-replicating access.
  double clamped(int x, int y) const noexcept;
  /// Bilinear sample at continuous pixel coordinates (pixel centers at integers),
  /// edge-replicate outside the grid.
  double bilinear(double x, double y) const noexcept;

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Clamps every value into [0,1]; call after arithmetic that may overshoot.
  void clamp01() noexcept;

  friend bool operator==(const IrImage&, const IrImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct Roi {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  static constexpr int kMinSide = 8;

  bool renderable() const noexcept { return w >= kMinSide && h >= kMinSide; }
  bool inside(int width, int height) const noexcept {
    return x0 >= 0 && y0 >= 0 && w > 0 && h > 0 && x0 + w <= width && y0 + h <= height;
  }
  bool inside(const IrImage& img) const noexcept { return inside(img.width(), img.height()); }
  double area() const noexcept { return static_cast<double>(w) * h; }

  friend bool operator==(const Roi&, const Roi&) = default;
};

/// Unit-norm feature vector returned by an encoder.
class FeatureVec {
 public:
  FeatureVec() = default;
  /// L2-normalizes `raw`; throws on a zero or non-finite vector.
  static FeatureVec normalized(Eigen::VectorXd raw);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  operator const Eigen::VectorXd&() const noexcept { return values_; }

  friend bool operator==(const FeatureVec& a, const FeatureVec& b) { return a.values_ == b.values_; }

 private:
  explicit FeatureVec(Eigen::VectorXd v) : values_(std::move(v)) {}
  Eigen::VectorXd values_;
};

struct DatasetItem {
  std::filesystem::path image;
  Roi roi;
  bool clean = true;
};

/// A manifest: image paths (absolute after loading), ROIs and the target category.
struct Dataset {
  std::string category;
  std::vector<DatasetItem> items;
};

/// A dataset item with its pixels loaded.
struct Sample {
  std::size_t index = 0;  // position in the owning dataset, used to key random streams
  std::string id;
  IrImage image;
  Roi roi;
  bool clean = true;
};

/// Throws unless the ROI is renderable and inside the image.
void check_roi(const IrImage& img, const Roi& roi);

IrImage crop(const IrImage& img, const Roi& roi);

enum class ImageErrorKind { unreadable, unsupported_depth, io_failure };

class ImageError : public std::runtime_error {
 public:
  ImageError(ImageErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ImageErrorKind kind() const noexcept { return kind_; }

 private:
  ImageErrorKind kind_;
};

/// Reads an 8- or 16-bit grayscale or RGB(A) PNG. RGB collapses to BT.601 luma,
/// alpha is dropped, integer range maps linearly onto [0,1].
IrImage load_image(const std::filesystem::path& path);
IrImage decode_png(std::span<const std::uint8_t> bytes);

/// Writes 8-bit grayscale, value = round(255 * intensity).
void save_image(const IrImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const IrImage& img);

/// Writes a 16-bit grayscale PNG (used by tests and the synthetic generator).
void save_image16(const IrImage& img, const std::filesystem::path& path);

/// Manifest JSON: {"category": str, "items": [{"image": path, "roi": [x0,y0,w,h], "clean": bool}]}.
/// Relative image paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest);
void save_dataset(const Dataset& ds, const std::filesystem::path& manifest);

/// Loads all images and validates every ROI; requires at least 2 items.
std::vector<Sample> load_samples(const Dataset& ds);

}  // namespace ucgp
