#include "rebal/mode_norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rebal/common.hpp"

namespace rebal::modenorm {

namespace {

constexpr double kLogLikTol = 1e-6;
constexpr int kMaxIterations = 300;

struct EmFit {
  std::vector<GaussianMode> modes;
  double loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
};

double log_normal_pdf(double x, double mean, double std) {
  double z = (x - mean) / std;
  return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// One EM run at a fixed component count. Components that starve (no
// responsibility mass) are removed and the run continues.
EmFit run_em(std::span<const double> values, int k, Rng& rng) {
  const auto n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  double total_std = std::sqrt(variance_of(values));
  if (total_std < kStdFloor) total_std = kStdFloor;

  EmFit fit;
  fit.modes.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto& m = fit.modes[static_cast<std::size_t>(i)];
    double q = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
    // Small jitter breaks exact symmetry when quantiles coincide.
    m.mean = quantile_sorted(sorted, q) + 1e-3 * total_std * (rng.uniform01() - 0.5);
    m.std = total_std;
    m.weight = 1.0 / static_cast<double>(k);
  }

  std::vector<double> resp;  // n x k, row-major
  std::vector<double> log_terms;
  while (fit.iterations < kMaxIterations) {
    int kk = static_cast<int>(fit.modes.size());
    resp.assign(n * static_cast<std::size_t>(kk), 0.0);
    log_terms.assign(static_cast<std::size_t>(kk), 0.0);

    // E-step in log space.
    double loglik = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double max_term = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < kk; ++j) {
        const auto& m = fit.modes[static_cast<std::size_t>(j)];
        double t = std::log(m.weight) + log_normal_pdf(values[r], m.mean, m.std);
        log_terms[static_cast<std::size_t>(j)] = t;
        max_term = std::max(max_term, t);
      }
      double sum = 0.0;
      for (int j = 0; j < kk; ++j)
        sum += std::exp(log_terms[static_cast<std::size_t>(j)] - max_term);
      double log_row = max_term + std::log(sum);
      loglik += log_row;
      for (int j = 0; j < kk; ++j)
        resp[r * static_cast<std::size_t>(kk) + static_cast<std::size_t>(j)] =
            std::exp(log_terms[static_cast<std::size_t>(j)] - log_row);
    }

    fit.trace.push_back(loglik);
    ++fit.iterations;
    bool converged =
        fit.trace.size() >= 2 && loglik - fit.trace[fit.trace.size() - 2] < kLogLikTol;
    fit.loglik = loglik;

    // M-step.
    std::vector<GaussianMode> updated;
    updated.reserve(static_cast<std::size_t>(kk));
    for (int j = 0; j < kk; ++j) {
      double nj = 0.0, sx = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double w = resp[r * static_cast<std::size_t>(kk) + static_cast<std::size_t>(j)];
        nj += w;
        sx += w * values[r];
      }
      if (nj < 1e-10) continue;  // starved component
      GaussianMode m;
      m.weight = nj / static_cast<double>(n);
      m.mean = sx / nj;
      double sv = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double w = resp[r * static_cast<std::size_t>(kk) + static_cast<std::size_t>(j)];
        double d = values[r] - m.mean;
        sv += w * d * d;
      }
      m.std = std::max(std::sqrt(sv / nj), kStdFloor);
      updated.push_back(m);
    }
    if (updated.empty()) break;
    double wsum = 0.0;
    for (const auto& m : updated) wsum += m.weight;
    for (auto& m : updated) m.weight /= wsum;
    fit.modes = std::move(updated);

    if (converged) break;
  }
  return fit;
}

}  // namespace

ModeModel fit_vgm(std::span<const double> values, int max_modes, double weight_threshold,
                  std::uint64_t seed) {
  if (values.empty()) throw DataError("fit_vgm: no values");
  if (max_modes < 1) throw ConfigError("fit_vgm: max_modes must be >= 1");

  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("fit_vgm: non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  ModeModel model;
  if (lo == hi) {
    model.degenerate = true;
    model.modes = {{1.0, lo, kStdFloor}};
    return model;
  }

  std::size_t distinct = 1;
  {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i] != sorted[i - 1]) ++distinct;
  }

  int k_cap = std::min<long>(max_modes, static_cast<long>(distinct));
  double n = static_cast<double>(values.size());

  EmFit best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_cap; ++k) {
    Rng rng = Rng::substream(seed, "vgm:" + std::to_string(k));
    EmFit fit = run_em(values, k, rng);
    double params = 3.0 * static_cast<double>(fit.modes.size()) - 1.0;
    double bic = -2.0 * fit.loglik + params * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(fit);
    }
  }

  // Weight-based pruning of negligible components.
  std::vector<GaussianMode> kept;
  for (const auto& m : best.modes)
    if (m.weight >= weight_threshold) kept.push_back(m);
  if (kept.empty()) {
    auto it = std::max_element(best.modes.begin(), best.modes.end(),
                               [](const auto& a, const auto& b) { return a.weight < b.weight; });
    kept.push_back(*it);
  }
  double wsum = 0.0;
  for (const auto& m : kept) wsum += m.weight;
  for (auto& m : kept) m.weight /= wsum;

  model.modes = std::move(kept);
  model.iterations = best.iterations;
  model.loglik_trace = std::move(best.trace);
  return model;
}

std::vector<double> responsibilities(double value, const ModeModel& model) {
  if (model.modes.empty()) throw Error("responsibilities: unfitted model");
  std::vector<double> logs(model.modes.size());
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < model.modes.size(); ++j) {
    const auto& m = model.modes[j];
    logs[j] = std::log(m.weight) + log_normal_pdf(value, m.mean, m.std);
    max_term = std::max(max_term, logs[j]);
  }
  double sum = 0.0;
  for (double& t : logs) {
    t = std::exp(t - max_term);
    sum += t;
  }
  for (double& t : logs) t /= sum;
  return logs;
}

Normalized normalize(double value, const ModeModel& model, Rng& rng) {
  auto resp = responsibilities(value, model);
  int mode = rng.categorical(resp);
  const auto& m = model.modes[static_cast<std::size_t>(mode)];
  double alpha = std::clamp((value - m.mean) / (4.0 * m.std), -1.0, 1.0);
  return {alpha, mode};
}

double denormalize(double alpha, int mode, const ModeModel& model) {
  if (mode < 0 || mode >= model.n_modes())
    throw Error("denormalize: mode index out of range");
  const auto& m = model.modes[static_cast<std::size_t>(mode)];
  return m.mean + 4.0 * m.std * alpha;
}

}  // namespace rebal::modenorm
