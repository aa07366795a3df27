#include "doctest.h"
#include "oracles.hpp"

#include "ucgp/encoder.hpp"
#include "ucgp/error.hpp"
#include "ucgp/scenes.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <thread>

using namespace ucgp;
using nlohmann::json;

TEST_CASE("toy features are unit norm, deterministic and batch-consistent") {
  const ToyEncoder enc;
  CHECK(enc.feature_dim() == 32);
  std::vector<IrImage> imgs;
  for (unsigned i = 0; i < 5; ++i) imgs.push_back(oracle::random_image(30 + i, 70, i));
  const auto batch = enc.encode_batch(imgs);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const auto f = enc.encode(imgs[i]);
    CHECK(f.values().norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f == batch[i]);
    CHECK(f == ToyEncoder().encode(imgs[i]));
  }
  CHECK_FALSE(ToyEncoder(8).encode(imgs[0]) == batch[0]);
  CHECK_THROWS_AS(enc.encode_batch(std::span<const IrImage>{}), Error);
}

TEST_CASE("toy raw descriptor: intensity pools and gradient energy") {
  const ToyEncoder enc;
  const auto flat = enc.raw_features(IrImage(64, 64, 0.75));
  REQUIRE(flat.size() == 192);
  for (int i = 0; i < 64; ++i) CHECK(flat[i] == doctest::Approx(0.25));  // centered intensity
  for (int i = 64; i < 192; ++i) CHECK(flat[i] == doctest::Approx(0.0));
  // Vertical stripes: horizontal gradient energy only.
  IrImage stripes(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) stripes(x, y) = (x / 2) % 2 ? 1.0 : 0.0;
  const auto s = enc.raw_features(stripes);
  double gx = 0, gy = 0;
  for (int i = 64; i < 128; ++i) gx += s[i];
  for (int i = 128; i < 192; ++i) gy += s[i];
  CHECK(gx > 1.0);
  CHECK(gy == doctest::Approx(0.0));
}

TEST_CASE("toy scores are cosine to the prototypes times 100") {
  const ToyEncoder enc;
  const IrImage img = oracle::random_image(40, 90, 9);
  const auto f = enc.encode(img);
  const auto s = enc.class_scores(img);
  REQUIRE(s.labels == default_labels());
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    CHECK(s.scores[i] == doctest::Approx(100.0 * f.values().dot(enc.prototype(i).values())));
  CHECK(s.score("dog") == s.scores[1]);
  CHECK_THROWS_AS(s.score("zebra"), Error);
}

TEST_CASE("a canonical person sketch is classified as a person") {
  const ToyEncoder enc;
  const auto s = enc.class_scores(*label_sketch("person"));
  CHECK(s.labels[s.top1()] == "person");
}

TEST_CASE("top-1 ties go to the earlier label") {
  ClassScores s{{"a", "b", "c"}, {1.0, 3.0, 3.0}};
  CHECK(s.top1() == 1);
}

TEST_CASE("unknown labels get a stable seeded prototype") {
  const ToyEncoder a(7, {"person", "zebra"}), b(7, {"person", "zebra"});
  CHECK(a.prototype(1) == b.prototype(1));
  CHECK(a.prototype(1).values().norm() == doctest::Approx(1.0));
}

TEST_CASE("make_encoder validates its spec") {
  CHECK(make_encoder({{"kind", "toy"}, {"seed", 3}, {"dim", 16}})->feature_dim() == 16);
  CHECK_THROWS_AS(make_encoder({{"kind", "magic"}}), Error);
  CHECK_THROWS_AS(make_encoder({{"kind", "remote"}}), Error);
}

namespace {

std::string b64decode(const std::string& in) {
  static const std::string chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=') break;
    const auto pos = chars.find(c);
    if (pos == std::string::npos) continue;
    val = (val << 6) + static_cast<int>(pos);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xFF));
      bits -= 8;
    }
  }
  return out;
}

IrImage image_of(const json& body) {
  const std::string bytes = b64decode(body.at("image_png_b64").get<std::string>());
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

// Fake service: the embedding is (width, height, mean, 1) so replies can be
// checked against the request. Requests sleep so that they overlap and
// complete out of order.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> in_flight{0}, peak{0};
  std::atomic<int> bad_id_width{-1};  // reply with a wrong id for images of this width
  std::atomic<int> fail_width{-1};    // reply 500 for images of this width

  FakeServer() {
    server.Get("/info", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"feature_dim", 4}, {"model", "fake-v1"}}.dump(), "application/json");
    });
    server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      const json body = json::parse(req.body);
      const IrImage img = image_of(body);
      std::this_thread::sleep_for(std::chrono::milliseconds(40 + 10 * (img.width() % 5)));
      --in_flight;
      if (img.width() == fail_width) {
        res.status = 500;
        res.set_content(json{{"error", "boom"}}.dump(), "application/json");
        return;
      }
      double mean = 0;
      for (double v : img.values()) mean += v;
      mean /= img.size();
      const std::string id = img.width() == bad_id_width ? "wrong" : body.at("id").get<std::string>();
      res.set_content(json{{"id", id}, {"dim", 4}, {"values", {img.width(), img.height(), mean, 1.0}}}.dump(),
                      "application/json");
    });
    server.Post("/scores", [](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      const IrImage img = image_of(body);
      std::vector<double> scores;
      for (std::size_t i = 0; i < body.at("labels").size(); ++i) scores.push_back(img.width() * 1.0 + i);
      res.set_content(json{{"id", body.at("id")}, {"scores", scores}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("remote client speaks the wire protocol") {
  FakeServer fake;
  const RemoteEncoder enc(fake.url(), {"person", "dog"});
  CHECK(enc.feature_dim() == 4);
  CHECK(enc.model() == "fake-v1");

  const IrImage img(20, 30, 0.4);
  const auto f = enc.encode(img);
  Eigen::Vector4d expect(20, 30, 0.4, 1);
  expect.normalize();
  CHECK((f.values() - expect).norm() < 1e-3);  // 8-bit PNG transport

  const auto s = enc.class_scores(img);
  CHECK(s.scores == std::vector<double>{20.0, 21.0});
}

TEST_CASE("remote batches keep request order under concurrent out-of-order replies") {
  FakeServer fake;
  const RemoteEncoder enc(fake.url());
  std::vector<IrImage> imgs;
  for (int i = 0; i < 16; ++i) imgs.push_back(IrImage(10 + i, 12, 0.05 * i));
  const auto feats = enc.encode_batch(imgs);
  REQUIRE(feats.size() == 16);
  for (int i = 0; i < 16; ++i) {
    const auto& v = feats[i].values();
    CHECK(v[0] / v[1] == doctest::Approx((10.0 + i) / 12.0));
  }
  CHECK(fake.peak.load() <= 8);
  CHECK(fake.peak.load() >= 2);

  fake.peak = 0;
  const RemoteEncoder narrow(fake.url(), default_labels(), 3);
  CHECK(narrow.encode_batch(imgs).size() == 16);
  CHECK(fake.peak.load() <= 3);
}

TEST_CASE("a bad reply fails the whole batch and names the first failing index") {
  FakeServer fake;
  const RemoteEncoder enc(fake.url());
  std::vector<IrImage> imgs;
  for (int i = 0; i < 8; ++i) imgs.push_back(IrImage(10 + i, 12, 0.5));
  fake.bad_id_width = 13;
  fake.fail_width = 15;
  try {
    enc.encode_batch(imgs);
    FAIL("batch with a bad reply succeeded");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("index 3") != std::string::npos);
    CHECK(std::string(e.what()).find("id mismatch") != std::string::npos);
  }
  fake.bad_id_width = -1;
  CHECK_THROWS_WITH_AS(enc.encode(imgs[5]), doctest::Contains("500"), Error);
}

TEST_CASE("an unreachable service fails at construction") {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  CHECK_THROWS_AS(RemoteEncoder("http://127.0.0.1:" + std::to_string(port), default_labels(), 8, 2.0), Error);
}
