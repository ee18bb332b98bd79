// Per-column Gaussian mixture fits and mode-specific normalization.
//
// A continuous value is represented as (alpha, mode): the mode is sampled
// from the posterior responsibilities and alpha = (value - mean)/(4*std),
// clipped to [-1, 1] to match the generator's tanh output range.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rebal/rng.hpp"

namespace rebal::modenorm {

inline constexpr double kStdFloor = 1e-4;
inline constexpr int kDefaultMaxModes = 10;
inline constexpr double kDefaultWeightThreshold = 0.005;

struct GaussianMode {
  double weight = 0.0;
  double mean = 0.0;
  double std = kStdFloor;
};

struct ModeModel {
  std::string column;
  std::vector<GaussianMode> modes;
  bool degenerate = false;          // constant column; single floor-variance mode
  int iterations = 0;               // EM iterations of the selected fit
  std::vector<double> loglik_trace; // per-iteration log-likelihood, non-decreasing

  int n_modes() const { return static_cast<int>(modes.size()); }
};

// Fits candidate mixtures with k = 1..max_modes by EM (converged when the
// log-likelihood improves by < 1e-6 or after 300 iterations), selects k by
// BIC, then drops components with weight < weight_threshold and renormalizes.
// Deterministic given seed. A constant column yields a single floor-variance
// mode flagged degenerate.
ModeModel fit_vgm(std::span<const double> values, int max_modes, double weight_threshold,
                  std::uint64_t seed);

inline ModeModel fit_vgm(std::span<const double> values, std::uint64_t seed) {
  return fit_vgm(values, kDefaultMaxModes, kDefaultWeightThreshold, seed);
}

// Posterior mode probabilities at a value; sums to 1.
std::vector<double> responsibilities(double value, const ModeModel& model);

struct Normalized {
  double alpha = 0.0;  // in [-1, 1]
  int mode = 0;
};

Normalized normalize(double value, const ModeModel& model, Rng& rng);
double denormalize(double alpha, int mode, const ModeModel& model);

}  // namespace rebal::modenorm
