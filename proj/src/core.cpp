#include "ucgp/core.hpp"

#include "ucgp/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"

namespace ucgp {

IrImage::IrImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw runtime_error("negative image dimensions");
  if (!(fill >= 0.0 && fill <= 1.0)) throw runtime_error("image fill value outside [0,1]");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

IrImage::IrImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 0 || height < 0) throw runtime_error("negative image dimensions");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw runtime_error("image data length does not match width x height");
  for (double v : values_)
    if (!(v >= 0.0 && v <= 1.0)) throw runtime_error("image intensity outside [0,1]");
}

double IrImage::clamped(int x, int y) const noexcept {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return values_[index(x, y)];
}

double IrImage::bilinear(double x, double y) const noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int ix = static_cast<int>(fx);
  const int iy = static_cast<int>(fy);
  const double v00 = clamped(ix, iy);
  if (ax == 0.0 && ay == 0.0) return v00;
  const double v10 = clamped(ix + 1, iy);
  const double v01 = clamped(ix, iy + 1);
  const double v11 = clamped(ix + 1, iy + 1);
  return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}

void IrImage::clamp01() noexcept {
  for (double& v : values_) v = std::clamp(v, 0.0, 1.0);
}

FeatureVec FeatureVec::normalized(Eigen::VectorXd raw) {
  const double n = raw.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw runtime_error("cannot normalize a zero or non-finite feature");
  raw /= n;
  return FeatureVec(std::move(raw));
}

void check_roi(const IrImage& img, const Roi& roi) {
  if (!roi.renderable())
    throw runtime_error("ROI " + std::to_string(roi.w) + "x" + std::to_string(roi.h) +
                        " is below the minimum renderable size of 8x8");
  if (!roi.inside(img)) throw runtime_error("ROI lies outside the image");
}

IrImage crop(const IrImage& img, const Roi& roi) {
  check_roi(img, roi);
  IrImage out(roi.w, roi.h);
  for (int y = 0; y < roi.h; ++y) {
    const auto src = img.values().subspan(static_cast<std::size_t>(roi.y0 + y) * img.width() + roi.x0, roi.w);
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(y) * roi.w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngRaw {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  std::string error;
  bool unsupported = false;
};

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<PngRaw*>(png_get_error_ptr(png));
  raw->error = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_memory_read(png_structp png, png_bytep out, png_size_t n) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + n > reader->bytes.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, reader->bytes.data() + reader->offset, n);
  reader->offset += n;
}

// All C++ objects touched here are owned by the caller, so a longjmp out of
// libpng never skips a destructor.
bool read_png_raw(FILE* file, MemoryReader* memory, PngRaw& raw) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &raw, png_error_handler, png_warning_handler);
  if (!png) {
    raw.error = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raw.error = "out of memory";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (file) {
    png_init_io(png, file);
  } else {
    png_set_read_fn(png, memory, png_memory_read);
  }
  png_read_info(png, info);
  raw.width = png_get_image_width(png, info);
  raw.height = png_get_image_height(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if ((raw.bit_depth != 8 && raw.bit_depth != 16) || color == PNG_COLOR_TYPE_PALETTE) {
    raw.unsupported = true;
    raw.error = "unsupported PNG layout: bit depth " + std::to_string(raw.bit_depth) +
                (color == PNG_COLOR_TYPE_PALETTE ? " (palette)" : "");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  raw.channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  raw.pixels.resize(row_bytes * raw.height);
  std::vector<png_bytep> rows(raw.height);
  for (png_uint_32 y = 0; y < raw.height; ++y) rows[y] = raw.pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

IrImage raw_to_image(const PngRaw& raw) {
  const int w = static_cast<int>(raw.width);
  const int h = static_cast<int>(raw.height);
  const double max_value = raw.bit_depth == 16 ? 65535.0 : 255.0;
  const int bytes = raw.bit_depth / 8;
  std::vector<double> values(static_cast<std::size_t>(w) * h);
  auto sample = [&](std::size_t byte_offset) -> double {
    if (bytes == 1) return raw.pixels[byte_offset];
    return static_cast<double>((raw.pixels[byte_offset] << 8) | raw.pixels[byte_offset + 1]);
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t base = i * static_cast<std::size_t>(raw.channels * bytes);
    double v;
    if (raw.channels == 1) {
      v = sample(base);
    } else {
      v = 0.299 * sample(base) + 0.587 * sample(base + bytes) + 0.114 * sample(base + 2 * bytes);
    }
    values[i] = std::clamp(v / max_value, 0.0, 1.0);
  }
  return IrImage(w, h, std::move(values));
}

[[noreturn]] void throw_read_failure(const PngRaw& raw, const std::string& source) {
  throw ImageError(raw.unsupported ? ImageErrorKind::unsupported_depth : ImageErrorKind::unreadable,
                   source + ": " + raw.error);
}

std::vector<std::uint8_t> quantize8(const IrImage& img) {
  std::vector<std::uint8_t> out(img.size());
  const auto v = img.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 255.0));
  return out;
}

}  // namespace

IrImage load_image(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw ImageError(ImageErrorKind::unreadable, "cannot open image " + path.string());
  PngRaw raw;
  if (!read_png_raw(file.get(), nullptr, raw)) throw_read_failure(raw, path.string());
  return raw_to_image(raw);
}

IrImage decode_png(std::span<const std::uint8_t> bytes) {
  PngRaw raw;
  MemoryReader reader{bytes, 0};
  if (!read_png_raw(nullptr, &reader, raw)) throw_read_failure(raw, "in-memory PNG");
  return raw_to_image(raw);
}

std::vector<std::uint8_t> encode_png(const IrImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  const auto pixels = quantize8(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw ImageError(ImageErrorKind::io_failure, std::string("PNG encode failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
    throw ImageError(ImageErrorKind::io_failure, std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

void save_image(const IrImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError(ImageErrorKind::io_failure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError(ImageErrorKind::io_failure, "write failed for " + path.string());
}

void save_image16(const IrImage& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  // LINEAR_Y is the simplified API's 16-bit gray format; values are written verbatim.
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<png_uint_16> pixels(img.size());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<png_uint_16>(std::lround(img.values()[i] * 65535.0));
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr))
    throw ImageError(ImageErrorKind::io_failure, std::string("PNG write failed: ") + image.message);
}

// ---------------------------------------------------------------------------
// Manifests

Dataset load_dataset(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) throw missing_input("dataset manifest not found: " + manifest.string());
  std::ifstream in(manifest);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed manifest " + manifest.string() + ": " + e.what());
  }
  Dataset ds;
  const auto base = manifest.parent_path();
  try {
    ds.category = j.at("category").get<std::string>();
    for (const auto& rec : j.at("items")) {
      DatasetItem item;
      std::filesystem::path p = rec.at("image").get<std::string>();
      item.image = p.is_absolute() ? p : base / p;
      const auto r = rec.at("roi").get<std::vector<int>>();
      if (r.size() != 4) throw config_error("roi must have 4 entries");
      item.roi = Roi{r[0], r[1], r[2], r[3]};
      item.clean = rec.value("clean", true);
      ds.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed manifest " + manifest.string() + ": " + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& manifest) {
  nlohmann::json j;
  j["category"] = ds.category;
  j["items"] = nlohmann::json::array();
  const auto base = manifest.parent_path();
  for (const auto& item : ds.items) {
    const auto rel = item.image.is_absolute() && !base.empty()
                         ? std::filesystem::relative(item.image, std::filesystem::absolute(base))
                         : item.image;
    j["items"].push_back({{"image", rel.generic_string()},
                          {"roi", {item.roi.x0, item.roi.y0, item.roi.w, item.roi.h}},
                          {"clean", item.clean}});
  }
  std::ofstream out(manifest);
  if (!out) throw runtime_error("cannot write manifest " + manifest.string());
  out << j.dump(2) << '\n';
}

std::vector<Sample> load_samples(const Dataset& ds) {
  if (ds.items.size() < 2) throw config_error("a dataset needs at least 2 items");
  std::vector<Sample> out;
  out.reserve(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& item = ds.items[i];
    if (!std::filesystem::exists(item.image)) throw missing_input("image not found: " + item.image.string());
    Sample s;
    s.index = i;
    s.id = item.image.stem().string();
    s.image = load_image(item.image);
    s.roi = item.roi;
    s.clean = item.clean;
    check_roi(s.image, s.roi);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ucgp
