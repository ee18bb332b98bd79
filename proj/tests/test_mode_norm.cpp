#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rebal/mode_norm.hpp"

using namespace rebal;
using namespace rebal::modenorm;

namespace {

std::vector<double> bimodal_sample(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(n);
  for (auto& v : values) v = rng.bernoulli(0.5) ? rng.normal(-5.0, 1.0) : rng.normal(5.0, 1.0);
  return values;
}

}  // namespace

TEST_CASE("bimodal sample recovers two modes near the truth") {
  auto values = bimodal_sample(2000, 17);
  auto model = fit_vgm(values, 10, 0.005, 7);

  REQUIRE(model.n_modes() == 2);
  std::vector<double> means{model.modes[0].mean, model.modes[1].mean};
  std::sort(means.begin(), means.end());
  CHECK(means[0] == doctest::Approx(-5.0).epsilon(0.06));
  CHECK(std::abs(means[0] + 5.0) < 0.3);
  CHECK(std::abs(means[1] - 5.0) < 0.3);

  double wsum = 0.0;
  for (const auto& m : model.modes) wsum += m.weight;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));

  // Per-iteration log-likelihood of the selected run never decreases.
  for (std::size_t i = 1; i < model.loglik_trace.size(); ++i)
    CHECK(model.loglik_trace[i] >= model.loglik_trace[i - 1] - 1e-9);
}

TEST_CASE("constant column degenerates to a floor-variance mode") {
  std::vector<double> values{3.0, 3.0, 3.0};
  auto model = fit_vgm(values, 10, 0.005, 1);
  CHECK(model.degenerate);
  REQUIRE(model.n_modes() == 1);
  CHECK(model.modes[0].mean == doctest::Approx(3.0));
  CHECK(model.modes[0].std == doctest::Approx(kStdFloor));
  CHECK(model.modes[0].weight == doctest::Approx(1.0));
}

TEST_CASE("unimodal sample keeps at least one mode with unit total weight") {
  Rng rng(3);
  std::vector<double> values(1000);
  for (auto& v : values) v = rng.normal();
  auto model = fit_vgm(values, 10, 0.005, 3);
  CHECK(model.n_modes() >= 1);
  double wsum = 0.0;
  for (const auto& m : model.modes) wsum += m.weight;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& m : model.modes) CHECK(m.std >= kStdFloor);
}

TEST_CASE("fit is deterministic given the seed") {
  auto values = bimodal_sample(500, 5);
  auto a = fit_vgm(values, 10, 0.005, 11);
  auto b = fit_vgm(values, 10, 0.005, 11);
  REQUIRE(a.n_modes() == b.n_modes());
  for (int i = 0; i < a.n_modes(); ++i) {
    CHECK(a.modes[static_cast<std::size_t>(i)].mean == b.modes[static_cast<std::size_t>(i)].mean);
    CHECK(a.modes[static_cast<std::size_t>(i)].std == b.modes[static_cast<std::size_t>(i)].std);
    CHECK(a.modes[static_cast<std::size_t>(i)].weight ==
          b.modes[static_cast<std::size_t>(i)].weight);
  }
}

TEST_CASE("fit_vgm input validation") {
  CHECK_THROWS_AS(fit_vgm(std::vector<double>{}, 10, 0.005, 1), DataError);
  CHECK_THROWS_AS(fit_vgm(std::vector<double>{1.0, 2.0}, 0, 0.005, 1), ConfigError);
  std::vector<double> with_nan{1.0, std::nan("")};
  CHECK_THROWS_AS(fit_vgm(with_nan, 10, 0.005, 1), DataError);
}

TEST_CASE("normalize on a one-mode model") {
  ModeModel model;
  model.modes = {{1.0, 0.0, 1.0}};
  Rng rng(1);

  SUBCASE("alpha formula") {
    auto norm = normalize(2.0, model, rng);
    CHECK(norm.alpha == doctest::Approx(0.5));
    CHECK(norm.mode == 0);
  }
  SUBCASE("clipping") {
    auto norm = normalize(10.0, model, rng);
    CHECK(norm.alpha == 1.0);
    auto lo = normalize(-10.0, model, rng);
    CHECK(lo.alpha == -1.0);
  }
}

TEST_CASE("posterior mode sampling matches brute-force responsibilities") {
  ModeModel model;
  model.modes = {{0.5, -5.0, 1.0}, {0.5, 5.0, 1.0}};

  // Brute-force posterior at value 5: overwhelmingly the second mode.
  auto resp = responsibilities(5.0, model);
  CHECK(resp[0] + resp[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(resp[1] > 0.999);

  Rng rng(123);
  int second = 0;
  for (int i = 0; i < 10000; ++i) second += normalize(5.0, model, rng).mode == 1;
  CHECK(second > 9900);

  // A midpoint value splits responsibilities evenly.
  auto mid = responsibilities(0.0, model);
  CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("responsibilities stay normalized far in the tails") {
  ModeModel model;
  model.modes = {{0.7, 0.0, 1.0}, {0.3, 3.0, 0.5}};
  for (double v : {-300.0, -50.0, 0.0, 50.0, 300.0}) {
    auto resp = responsibilities(v, model);
    double sum = 0.0;
    for (double r : resp) {
      CHECK(r >= 0.0);
      sum += r;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("denormalize formula and round-trip") {
  ModeModel model;
  model.modes = {{0.6, 0.0, 1.0}, {0.4, 7.0, 2.0}};

  CHECK(denormalize(0.5, 0, model) == doctest::Approx(2.0));
  CHECK(denormalize(0.0, 1, model) == doctest::Approx(7.0));
  CHECK_THROWS_AS(denormalize(0.0, 2, model), Error);

  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    double v = rng.uniform(-3.9, 3.9);  // within 4 std of mode 1
    auto norm = normalize(v, model, rng);
    CHECK(denormalize(norm.alpha, norm.mode, model) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("weight pruning drops negligible components and renormalizes") {
  // Heavily lopsided two-cluster data: tiny cluster below the threshold
  // weight is dropped after selection.
  Rng rng(21);
  std::vector<double> values;
  for (int i = 0; i < 2000; ++i) values.push_back(rng.normal(0.0, 1.0));
  for (int i = 0; i < 4; ++i) values.push_back(rng.normal(40.0, 0.1));
  auto model = fit_vgm(values, 10, 0.005, 2);
  double wsum = 0.0;
  for (const auto& m : model.modes) {
    CHECK(m.weight >= 0.005);
    wsum += m.weight;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
}
