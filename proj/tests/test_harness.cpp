#include "doctest.h"
#include "oracles.hpp"

#include "ucgp/error.hpp"
#include "ucgp/harness.hpp"
#include "ucgp/scenes.hpp"

#include <fstream>
#include <sstream>

using namespace ucgp;

namespace {

// small local frame builder so the harness test does not depend on the synth module
IrImage synth_like(std::size_t i, Roi& roi) {
  IrImage img(64, 96, 0.25 + 0.02 * static_cast<double>(i));
  roi = {16, 8, 32, 80};
  draw_person(img, PersonPose{}, roi);
  return img;
}

ClassScores cs(std::vector<double> s) { return {{"person", "dog", "car"}, std::move(s)}; }

std::vector<Sample> two_people() {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < 2; ++i) {
    Roi roi;
    Sample s{i, "p" + std::to_string(i), synth_like(i, roi), roi, true};
    out.push_back(std::move(s));
  }
  return out;
}

PatchParams zero_patch(const CgmConfig& cgm) {
  return decode(std::vector<double>(genome_dim(cgm), 0.0), cgm);
}

}  // namespace

TEST_CASE("outcome success is a top-1 change away from the target") {
  auto o = make_outcome("a", cs({10, 5, 1}), cs({4, 6, 1}), "person");
  CHECK(o.success);
  CHECK(o.clean_top1 == "person");
  CHECK(o.adv_top1 == "dog");
  // c* = dog (6 among non-targets)
  CHECK(target_promotion(o) == doctest::Approx(1.0));
  CHECK(adv_margin(o) == doctest::Approx(2.0));

  o = make_outcome("b", cs({10, 5, 1}), cs({9, 2, 3}), "person");
  CHECK_FALSE(o.success);
  CHECK(strongest_other(o.adv_scores, "person") == 2);
  CHECK(target_promotion(o) == doctest::Approx(2.0));
  CHECK(adv_margin(o) == doctest::Approx(-6.0));

  // ties among non-targets go to the earlier label
  CHECK(strongest_other(cs({0, 3, 3}), "person") == 1);
  CHECK_THROWS_AS(make_outcome("c", cs({1, 2, 3}), cs({1, 2, 3}), "bicycle"), Error);
  CHECK_THROWS_AS(make_outcome("c", cs({1, 2, 3}), ClassScores{{"x", "y", "z"}, {1, 2, 3}}, "person"), Error);
}

TEST_CASE("summary metrics by hand") {
  std::vector<AttackOutcome> v{
      make_outcome("a", cs({10, 5, 1}), cs({4, 6, 1}), "person"),  // success, promo 1, margin 2
      make_outcome("b", cs({10, 5, 1}), cs({9, 2, 3}), "person"),  // fail, promo 2, margin -6
      make_outcome("c", cs({1, 5, 1}), cs({1, 7, 1}), "person"),   // clean wrong, success, promo 2, margin 6
      make_outcome("d", cs({8, 1, 1}), cs({8, 1, 2}), "person"),   // fail, c*=car, promo 1, margin -6
  };
  const auto m = summarize(v);
  CHECK(m.count == 4);
  CHECK(m.asr == doctest::Approx(50.0));
  CHECK(m.clean_accuracy == doctest::Approx(0.75));
  CHECK(m.adv_accuracy == doctest::Approx(0.5));
  REQUIRE(m.rel_drop);
  CHECK(*m.rel_drop == doctest::Approx(100.0 * 0.25 / 0.75));
  CHECK(m.target_promotion == doctest::Approx(1.5));
  CHECK(m.adv_margin == doctest::Approx(-1.0));

  const auto j = to_json(m);
  CHECK(j["asr"] == 50.0);
  CHECK(to_json(v[0])["ds_target"] == 1.0);
}

TEST_CASE("relative drop is undefined without clean accuracy") {
  std::vector<AttackOutcome> v{make_outcome("a", cs({1, 5, 1}), cs({1, 7, 1}), "person")};
  const auto m = summarize(v);
  CHECK_FALSE(m.rel_drop.has_value());
  CHECK(to_json(m)["rel_drop"] == "undefined");
  CHECK_THROWS_AS(summarize(std::span<const AttackOutcome>{}), Error);
}

TEST_CASE("outcomes CSV") {
  const auto dir = oracle::scratch("harness_csv");
  std::vector<AttackOutcome> v{make_outcome("a", cs({10, 5, 1}), cs({4, 6, 1}), "person"),
                               make_outcome("b", cs({10, 5, 1}), cs({9, 2, 3}), "person")};
  write_outcomes_csv(v, dir / "o.csv");
  std::ifstream in(dir / "o.csv");
  std::string header, row1, row2, extra;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "sample_id,clean_top1,adv_top1,success,ds_target,m_adv");
  CHECK(row1 == "a,person,dog,1,1,2");
  CHECK(row2 == "b,person,person,0,2,-6");
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("an empty patch changes nothing") {
  const auto enc = std::make_shared<ToyEncoder>();
  const auto samples = two_people();
  CgmConfig cgm;
  const PatchParams empty = zero_patch(cgm);
  const auto outcomes = evaluate_patch(*enc, samples, empty, cgm, PasteConfig{}, "person", 2);
  REQUIRE(outcomes.size() == 2);
  for (const auto& o : outcomes) {
    CHECK(o.clean_scores.scores == o.adv_scores.scores);
    CHECK(target_promotion(o) == 0.0);
  }
  // ids carried through in order
  CHECK(outcomes[1].sample_id == "p1");
}

TEST_CASE("sweeps record failing cells and continue") {
  const auto good = std::make_shared<ToyEncoder>();
  const auto narrow = std::make_shared<ToyEncoder>(7, std::vector<std::string>{"dog", "car"});
  std::vector<SweepDataset> ds{{"a", "person", two_people()}, {"b", "person", two_people()}};
  std::vector<EncoderHandle> encs{good, narrow, nullptr};
  CgmConfig cgm;
  const auto cells = transfer_sweep(zero_patch(cgm), cgm, PasteConfig{}, ds, encs, 2);
  REQUIRE(cells.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(cells[k].dataset == k / 3);
    CHECK(cells[k].encoder == k % 3);
  }
  CHECK(cells[0].summary.has_value());
  CHECK(cells[0].error.empty());
  CHECK_FALSE(cells[1].summary.has_value());
  CHECK(cells[1].error.find("target") != std::string::npos);
  CHECK_FALSE(cells[5].error.empty());
  CHECK(cells[3].summary->asr == cells[0].summary->asr);
}
