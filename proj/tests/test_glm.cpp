#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rebal/glm.hpp"
#include "rebal/montecarlo.hpp"
#include "rebal/resampling.hpp"

using namespace rebal;
using namespace rebal::glm;

namespace {

DesignMatrix simulated_binary_design(long n, double intercept, const Eigen::Vector3d& beta,
                                     std::uint64_t seed) {
  auto sim = mc::simulate_binary({n, beta, intercept, std::nullopt}, seed);
  return make_design(sim.data, true);
}

}  // namespace

TEST_CASE("all-zero coefficients predict one half") {
  LogitFit fit;
  fit.coefficients = Eigen::Vector3d::Zero();
  fit.covariance = Eigen::Matrix3d::Identity();
  fit.names = {"(intercept)", "a", "b"};
  fit.converged = true;
  CHECK(predict_prob(fit, Eigen::Vector2d(0.7, -0.3)) == doctest::Approx(0.5));
}

TEST_CASE("predict_prob saturation and hand value") {
  LogitFit fit;
  fit.converged = true;
  SUBCASE("deep negative intercept") {
    fit.coefficients = Eigen::VectorXd::Zero(1);
    fit.coefficients[0] = -50.0;
    CHECK(predict_prob(fit, Eigen::VectorXd(0)) < 1e-20);
  }
  SUBCASE("logit(2) by hand") {
    fit.coefficients = Eigen::Vector2d(1.0, 1.0);
    double p = predict_prob(fit, Eigen::VectorXd::Ones(1));
    CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
    CHECK(p == doctest::Approx(0.8808).epsilon(1e-4));
  }
  SUBCASE("width mismatch") {
    fit.coefficients = Eigen::Vector2d(1.0, 1.0);
    CHECK_THROWS_AS(predict_prob(fit, Eigen::Vector2d(1.0, 1.0)), DataError);
  }
}

TEST_CASE("binary fit recovers a known model and satisfies the score equation") {
  auto design = simulated_binary_design(4000, 0.5, {1.0, -1.5, 2.0}, 42);
  auto fit = fit_binary_logit(design);
  CHECK(fit.converged);

  // Score at the optimum: sum (y - p) x = 0.
  Eigen::VectorXd eta = design.features * fit.coefficients;
  Eigen::VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
  Eigen::VectorXd score =
      design.features.transpose() * (design.response.cast<double>() - prob);
  CHECK(score.lpNorm<Eigen::Infinity>() < 1e-6);

  // Covariance is symmetric positive definite.
  CHECK(fit.covariance.isApprox(fit.covariance.transpose(), 1e-10));
  Eigen::LLT<Eigen::MatrixXd> llt(fit.covariance);
  CHECK(llt.info() == Eigen::Success);

  CHECK(fit.mcfadden_r2() > 0.0);
  CHECK(fit.mcfadden_r2() < 1.0);
}

TEST_CASE("binary MLE lands within 3 SE of the truth in most replications") {
  // Balanced design, beta = (2,2,2); desk-scale version of the full check.
  Eigen::Vector3d beta(2.0, 2.0, 2.0);
  double intercept = mc::calibrate_intercept(beta, 0.5, 99);
  int hits = 0;
  const int reps = 25;
  for (int r = 0; r < reps; ++r) {
    auto design = simulated_binary_design(4000, intercept, beta, 1000 + r);
    auto fit = fit_binary_logit(design);
    bool ok = true;
    for (int j = 1; j <= 3; ++j) {
      double se = std::sqrt(fit.covariance(j, j));
      ok = ok && std::abs(fit.coefficients[j] - 2.0) <= 3.0 * se;
    }
    hits += ok;
  }
  CHECK(hits >= reps * 9 / 10);
}

TEST_CASE("separation is reported, not silently fitted") {
  // y identical to a binary feature.
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}},
                    {"flag", ColumnKind::discrete, {"0", "1"}},
                    {"y", ColumnKind::discrete, {"0", "1"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  Dataset data(schema);
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    double flag = i % 2 == 0 ? 1.0 : 0.0;
    data.append_row(std::vector<double>{rng.normal(), flag, flag});
  }
  auto design = make_design(data, true);
  CHECK_THROWS_AS(fit_binary_logit(design), NumericalError);
}

TEST_CASE("single-class response is rejected") {
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}}, {"y", ColumnKind::discrete, {"0", "1"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  Dataset data(schema);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) data.append_row(std::vector<double>{rng.normal(), 0.0});
  CHECK_THROWS_AS(fit_binary_logit(make_design(data, true)), DataError);
}

TEST_CASE("ordered class probabilities from fixed parameters") {
  OrderedFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(1);
  fit.thresholds = Eigen::Vector2d(0.0, 1.0);
  fit.n_classes = 3;
  fit.converged = true;
  auto probs = predict_class_probs(fit, Eigen::VectorXd::Zero(1));
  double f0 = 0.5;
  double f1 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(probs[0] == doctest::Approx(f0).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(f1 - f0).epsilon(1e-12));
  CHECK(probs[2] == doctest::Approx(1.0 - f1).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(0.2311).epsilon(1e-3));
  CHECK(probs[2] == doctest::Approx(0.2689).epsilon(1e-3));
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ordered fit recovers simulated parameters") {
  Eigen::Vector3d beta(2.0, 2.0, 2.0);
  auto thresholds = mc::calibrate_thresholds(beta, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 5);
  mc::OrderedDgp dgp;
  dgp.n = 6000;
  dgp.beta = beta;
  dgp.thresholds = thresholds;
  auto sim = mc::simulate_ordered(dgp, 31337);
  auto design = make_design(sim.data, false);
  auto fit = fit_ordered_logit(design, 3);
  CHECK(fit.converged);

  for (int j = 0; j < 3; ++j) {
    double se = std::sqrt(fit.covariance(j, j));
    CHECK(std::abs(fit.coefficients[j] - 2.0) <= 4.0 * se);
  }
  CHECK(fit.thresholds[0] < fit.thresholds[1]);
  CHECK(fit.thresholds[0] == doctest::Approx(thresholds[0]).epsilon(0.15));
  CHECK(fit.thresholds[1] == doctest::Approx(thresholds[1]).epsilon(0.15));

  // Per-row class probabilities sum to one.
  for (int i = 0; i < 50; ++i) {
    auto probs = predict_class_probs(fit, design.features.row(i).transpose());
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("ordered MLE within 3 SE of truth in most replications") {
  Eigen::Vector3d beta(2.0, 2.0, 2.0);
  auto thresholds = mc::calibrate_thresholds(beta, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 5);
  int hits = 0;
  const int reps = 15;
  for (int r = 0; r < reps; ++r) {
    mc::OrderedDgp dgp;
    dgp.n = 6000;
    dgp.beta = beta;
    dgp.thresholds = thresholds;
    auto sim = mc::simulate_ordered(dgp, 7000 + r);
    auto fit = fit_ordered_logit(make_design(sim.data, false), 3);
    bool ok = true;
    for (int j = 0; j < 3; ++j) {
      double se = std::sqrt(fit.covariance(j, j));
      ok = ok && std::abs(fit.coefficients[j] - 2.0) <= 3.0 * se;
    }
    hits += ok;
  }
  CHECK(hits >= reps * 8 / 10);
}

TEST_CASE("ordered analytic gradient matches finite differences") {
  // Validates the score used by the Newton solver through the public
  // log-likelihood surface: perturbing the fit away from the optimum must
  // lower the likelihood in every direction (local maximum), and the fitted
  // score is numerically zero by the convergence criterion.
  Eigen::Vector3d beta(1.0, -1.0, 0.5);
  mc::OrderedDgp dgp;
  dgp.n = 1500;
  dgp.beta = beta;
  dgp.thresholds = {-0.5, 0.8};
  auto sim = mc::simulate_ordered(dgp, 77);
  auto design = make_design(sim.data, false);
  auto fit = fit_ordered_logit(design, 3);

  auto loglik_at = [&](const Eigen::VectorXd& coefs, const Eigen::VectorXd& gammas) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < design.features.rows(); ++i) {
      double eta = design.features.row(i).dot(coefs);
      int y = design.response[i];
      double hi = y < 2 ? sigmoid(gammas[y] - eta) : 1.0;
      double lo = y > 0 ? sigmoid(gammas[y - 1] - eta) : 0.0;
      ll += std::log(hi - lo);
    }
    return ll;
  };

  double at_opt = loglik_at(fit.coefficients, fit.thresholds);
  CHECK(at_opt == doctest::Approx(fit.log_likelihood).epsilon(1e-9));
  double h = 1e-3;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd up = fit.coefficients, down = fit.coefficients;
    up[j] += h;
    down[j] -= h;
    // Central difference of the score is ~0 at the maximum.
    double fd_score = (loglik_at(up, fit.thresholds) - loglik_at(down, fit.thresholds)) / (2 * h);
    CHECK(std::abs(fd_score) < 1e-3);
    CHECK(loglik_at(up, fit.thresholds) <= at_opt + 1e-9);
    CHECK(loglik_at(down, fit.thresholds) <= at_opt + 1e-9);
  }
}

TEST_CASE("ordered fit input validation") {
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}},
                    {"y", ColumnKind::discrete, {"0", "1", "2"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::ordered;
  Dataset data(schema);
  Rng rng(1);
  for (int i = 0; i < 60; ++i)
    data.append_row(std::vector<double>{rng.normal(), static_cast<double>(i % 2)});  // class 2 empty
  CHECK_THROWS_AS(fit_ordered_logit(make_design(data, false), 3), DataError);
}

TEST_CASE("report rows carry the star legend") {
  CHECK(significance_stars(0.004) == "***");
  CHECK(significance_stars(0.02) == "**");
  CHECK(significance_stars(0.07) == "*");
  CHECK(significance_stars(0.2) == "");
  CHECK(wald_p_value(1.959964) == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("null model pseudo R2 is zero") {
  LogitFit fit;
  fit.log_likelihood = -100.0;
  fit.null_log_likelihood = -100.0;
  CHECK(fit.mcfadden_r2() == doctest::Approx(0.0));
}

TEST_CASE("inference report formats names, stars, and R2") {
  auto design = simulated_binary_design(3000, 0.2, {1.5, 0.0, 1.0}, 8);
  auto fit = fit_binary_logit(design);
  auto report = inference_report(fit);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].name == "(intercept)");
  CHECK(report.rows[1].name == "x1");
  CHECK(report.rows[3].name == "x3=1");
  CHECK(report.rows[1].stars == "***");  // strong true effect
  CHECK(report.has_pseudo_r2);
  auto text = report.to_text();
  CHECK(text.find("Pseudo R-squ.") != std::string::npos);
  CHECK(text.find("***p-value < 0.01") != std::string::npos);
  auto csv = report.to_csv();
  CHECK(csv.find("name,coefficient,std_error,z,p_value,stars") == 0);

  LogitFit bad;
  bad.converged = false;
  CHECK_THROWS_AS(inference_report(bad), NumericalError);
}

TEST_CASE("undersampling the majority shifts the intercept by -log(keep)") {
  // Keep fraction 0.2 on class 0: expected shift -log(0.2) = +1.609.
  Eigen::Vector3d beta(1.0, 1.0, 1.0);
  double intercept = mc::calibrate_intercept(beta, 0.5, 55);
  const double keep = 0.2;
  const int reps = 50;
  double shift_sum = 0.0;
  Eigen::Vector3d slope_shift_sum = Eigen::Vector3d::Zero();
  for (int r = 0; r < reps; ++r) {
    auto sim = mc::simulate_binary({4000, beta, intercept, std::nullopt}, 40000 + r);
    auto full_fit = fit_binary_logit(make_design(sim.data, true));

    auto counts = sim.data.class_counts();
    std::map<int, long> targets{
        {0, std::max(1L, static_cast<long>(std::llround(keep * counts[0])))}};
    auto reduced = resampling::random_undersample(sim.data, targets, 90000 + r);
    auto ru_fit = fit_binary_logit(make_design(reduced, true));

    shift_sum += ru_fit.coefficients[0] - full_fit.coefficients[0];
    slope_shift_sum += (ru_fit.coefficients.tail(3) - full_fit.coefficients.tail(3));
  }
  double mean_shift = shift_sum / reps;
  CHECK(mean_shift == doctest::Approx(-std::log(keep)).epsilon(0.15 / 1.609));
  for (int j = 0; j < 3; ++j) CHECK(std::abs(slope_shift_sum[j] / reps) < 0.15);
}
