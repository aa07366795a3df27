#include "ucgp/encoder.hpp"

#include "ucgp/error.hpp"
#include "ucgp/rng.hpp"
#include "ucgp/scenes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "httplib.h"

namespace ucgp {

double ClassScores::score(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw runtime_error("label '" + label + "' not in score vector");
  return scores[static_cast<std::size_t>(it - labels.begin())];
}

double category_probability(const ClassScores& scores, const std::string& label) {
  const double target = scores.score(label);
  const double hi = *std::max_element(scores.scores.begin(), scores.scores.end());
  double z = 0;
  for (double v : scores.scores) z += std::exp(v - hi);
  return std::exp(target - hi) / z;
}

std::size_t ClassScores::top1() const {
  if (scores.empty()) throw runtime_error("empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::vector<FeatureVec> Encoder::encode_batch(std::span<const IrImage> imgs) const {
  if (imgs.empty()) throw runtime_error("encode_batch needs at least one image");
  std::vector<FeatureVec> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(encode(img));
  return out;
}

std::vector<std::string> default_labels() {
  return {"person", "dog", "car", "bicycle", "chair", "bench", "fence", "kite", "umbrella", "traffic light"};
}

// ---------------------------------------------------------------------------
// Toy encoder

namespace {

/// Area-averaging resize: every output pixel is the exact mean of the source
/// area it covers.
IrImage resize_area(const IrImage& img, int ow, int oh) {
  const double sx = static_cast<double>(img.width()) / ow;
  const double sy = static_cast<double>(img.height()) / oh;
  IrImage out(ow, oh);
  for (int oy = 0; oy < oh; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < ow; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;
      double sum = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < static_cast<int>(std::ceil(y1)); ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = static_cast<int>(std::floor(x0)); x < static_cast<int>(std::ceil(x1)); ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          sum += wx * wy * img.clamped(x, y);
        }
      }
      out(ox, oy) = std::clamp(sum / (sx * sy), 0.0, 1.0);
    }
  }
  return out;
}

constexpr double kGradientWeight = 2.0;

}  // namespace

ToyEncoder::ToyEncoder(std::uint64_t seed, std::vector<std::string> labels, std::size_t dim)
    : seed_(seed), dim_(dim), labels_(std::move(labels)) {
  if (dim_ < 2) throw config_error("toy encoder feature_dim must be >= 2");
  projection_.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(kRawDim));
  CounterRng rng(derive_seed(seed_, 0x70726F6Aull));
  const double scale = 1.0 / std::sqrt(static_cast<double>(kRawDim));
  for (Eigen::Index r = 0; r < projection_.rows(); ++r)
    for (Eigen::Index c = 0; c < projection_.cols(); ++c) projection_(r, c) = rng.normal() * scale;

  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (label_sketch(labels_[i])) {
      // Like a prompt ensemble: average the canonical sketch with variants over
      // cluttered backgrounds so the prototype is not tied to a flat scene.
      Eigen::VectorXd sum = encode(*label_sketch(labels_[i])).values();
      for (std::size_t v = 1; v < kEnsemble; ++v)
        sum += encode(*label_sketch(labels_[i], 48, 112, derive_seed(seed_, 0x656E73ull, i, v))).values();
      prototypes_.push_back(FeatureVec::normalized(std::move(sum)));
    } else {
      // Unknown label: a seeded random direction keyed on the label text.
      std::uint64_t h = derive_seed(seed_, 0x6C61626Cull);
      for (unsigned char ch : labels_[i]) h = hash_combine(h, ch);
      CounterRng lr(h);
      Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
      for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = lr.normal();
      prototypes_.push_back(FeatureVec::normalized(std::move(v)));
    }
  }
}

Eigen::VectorXd ToyEncoder::raw_features(const IrImage& img) const {
  if (img.empty()) throw runtime_error("cannot encode an empty image");
  const IrImage small = resize_area(img, kResize, kResize);
  constexpr int block = kResize / kPool;
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kRawDim));
  constexpr int cells = kPool * kPool;
  for (int by = 0; by < kPool; ++by) {
    for (int bx = 0; bx < kPool; ++bx) {
      double mean = 0.0, gh = 0.0, gv = 0.0;
      for (int y = by * block; y < (by + 1) * block; ++y)
        for (int x = bx * block; x < (bx + 1) * block; ++x) {
          const double v = small(x, y);
          mean += v;
          const double dx = x + 1 < kResize ? small(x + 1, y) - v : 0.0;
          const double dy = y + 1 < kResize ? small(x, y + 1) - v : 0.0;
          gh += dx * dx;
          gv += dy * dy;
        }
      const double n = block * block;
      const int cell = by * kPool + bx;
      raw(cell) = mean / n - 0.5;
      raw(cells + cell) = kGradientWeight * std::sqrt(gh / n);
      raw(2 * cells + cell) = kGradientWeight * std::sqrt(gv / n);
    }
  }
  return raw;
}

FeatureVec ToyEncoder::encode(const IrImage& img) const {
  Eigen::VectorXd z = projection_ * raw_features(img);
  if (!(z.norm() > 0.0)) z(0) = 1.0;  // only reachable for a perfectly flat mid-gray input
  return FeatureVec::normalized(std::move(z));
}

ClassScores ToyEncoder::class_scores(const IrImage& img) const {
  if (labels_.empty()) throw config_error("toy encoder has no class labels configured");
  const FeatureVec z = encode(img);
  ClassScores s;
  s.labels = labels_;
  s.scores.reserve(labels_.size());
  for (const auto& p : prototypes_) s.scores.push_back(kLogitScale * z.values().dot(p.values()));
  return s;
}

// ---------------------------------------------------------------------------
// Remote encoder

std::string base64_png(const IrImage& img) {
  const auto bytes = encode_png(img);
  return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

namespace {


std::unique_ptr<httplib::Client> make_client(const std::string& url, double timeout_s) {
  auto client = std::make_unique<httplib::Client>(url);
  const auto sec = static_cast<time_t>(timeout_s);
  const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
  client->set_connection_timeout(sec, usec);
  client->set_read_timeout(sec, usec);
  client->set_write_timeout(sec, usec);
  return client;
}

nlohmann::json request(httplib::Client& client, const std::string& path, const nlohmann::json* body) {
  auto res = body ? client.Post(path, body->dump(), "application/json") : client.Get(path);
  if (!res) throw runtime_error("remote encoder " + path + ": transport failure (" + httplib::to_string(res.error()) + ")");
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw runtime_error("remote encoder " + path + ": non-JSON reply with status " + std::to_string(res->status));
  }
  if (res->status != 200) {
    const std::string msg = reply.is_object() && reply.contains("error") ? reply["error"].get<std::string>() : res->body;
    throw runtime_error("remote encoder " + path + ": status " + std::to_string(res->status) + ": " + msg);
  }
  return reply;
}

std::atomic<std::uint64_t> g_request_counter{0};

}  // namespace

RemoteEncoder::RemoteEncoder(std::string url, std::vector<std::string> labels, std::size_t max_in_flight,
                             double timeout_s)
    : url_(std::move(url)), labels_(std::move(labels)), max_in_flight_(std::max<std::size_t>(1, max_in_flight)),
      timeout_s_(timeout_s) {
  auto client = make_client(url_, timeout_s_);
  const auto info = request(*client, "/info", nullptr);
  try {
    dim_ = info.at("feature_dim").get<std::size_t>();
    model_ = info.value("model", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw runtime_error(std::string("remote encoder /info: malformed reply: ") + e.what());
  }
  if (dim_ < 2) throw runtime_error("remote encoder reports feature_dim < 2");
}

std::string RemoteEncoder::next_id() const { return "req-" + std::to_string(g_request_counter.fetch_add(1)); }

nlohmann::json RemoteEncoder::post(const std::string& path, const nlohmann::json& body) const {
  auto client = make_client(url_, timeout_s_);
  return request(*client, path, &body);
}

FeatureVec RemoteEncoder::parse_embedding(const nlohmann::json& reply, const std::string& id) const {
  try {
    if (reply.at("id").get<std::string>() != id) throw runtime_error("remote encoder /embed: reply id mismatch");
    const auto values = reply.at("values").get<std::vector<double>>();
    const auto dim = reply.at("dim").get<std::size_t>();
    if (dim != dim_ || values.size() != dim_)
      throw runtime_error("remote encoder /embed: dimension " + std::to_string(values.size()) + " != " +
                          std::to_string(dim_));
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return FeatureVec::normalized(std::move(v));
  } catch (const nlohmann::json::exception& e) {
    throw runtime_error(std::string("remote encoder /embed: malformed reply: ") + e.what());
  }
}

FeatureVec RemoteEncoder::encode(const IrImage& img) const {
  if (img.empty()) throw runtime_error("cannot encode an empty image");
  const std::string id = next_id();
  return parse_embedding(post("/embed", {{"id", id}, {"image_png_b64", base64_png(img)}}), id);
}

std::vector<FeatureVec> RemoteEncoder::encode_batch(std::span<const IrImage> imgs) const {
  if (imgs.empty()) throw runtime_error("encode_batch needs at least one image");
  std::vector<FeatureVec> out(imgs.size());
  std::vector<std::string> errors(imgs.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(max_in_flight_, imgs.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      auto client = make_client(url_, timeout_s_);
      for (std::size_t i = next.fetch_add(1); i < imgs.size(); i = next.fetch_add(1)) {
        try {
          const std::string id = next_id();
          const nlohmann::json body{{"id", id}, {"image_png_b64", base64_png(imgs[i])}};
          out[i] = parse_embedding(request(*client, "/embed", &body), id);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw runtime_error("encode_batch failed at index " + std::to_string(i) + ": " + errors[i]);
  return out;
}

ClassScores RemoteEncoder::class_scores(const IrImage& img) const {
  if (labels_.empty()) throw config_error("remote encoder has no class labels configured");
  const std::string id = next_id();
  const auto reply = post("/scores", {{"id", id}, {"image_png_b64", base64_png(img)}, {"labels", labels_}});
  try {
    if (reply.at("id").get<std::string>() != id) throw runtime_error("remote encoder /scores: reply id mismatch");
    ClassScores s;
    s.labels = labels_;
    s.scores = reply.at("scores").get<std::vector<double>>();
    if (s.scores.size() != labels_.size()) throw runtime_error("remote encoder /scores: score count != label count");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw runtime_error(std::string("remote encoder /scores: malformed reply: ") + e.what());
  }
}

EncoderHandle make_encoder(const nlohmann::json& spec) {
  const std::string kind = spec.value("kind", std::string("toy"));
  auto labels = spec.contains("labels") ? spec.at("labels").get<std::vector<std::string>>() : default_labels();
  if (kind == "toy") {
    return std::make_shared<ToyEncoder>(spec.value("seed", std::uint64_t{7}), std::move(labels),
                                        spec.value("dim", std::size_t{32}));
  }
  if (kind == "remote") {
    if (!spec.contains("url")) throw config_error("remote encoder spec needs a url");
    return std::make_shared<RemoteEncoder>(spec.at("url").get<std::string>(), std::move(labels),
                                           spec.value("max_in_flight", std::size_t{8}),
                                           spec.value("timeout_s", 30.0));
  }
  throw config_error("unknown encoder kind '" + kind + "'");
}

}  // namespace ucgp
