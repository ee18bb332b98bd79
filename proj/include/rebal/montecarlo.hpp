// Simulation harness: known-truth data-generating processes, replication
// orchestration across rebalancing treatments, parameter-recovery
// aggregation, and probability-prediction AMSE.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebal/ctgan.hpp"
#include "rebal/glm.hpp"
#include "rebal/tabular.hpp"

namespace rebal::mc {

// Fixed feature law: X1, X2 ~ Normal(0,1), X3 ~ Bernoulli(0.2).
inline constexpr double kBernoulliRate = 0.2;
inline constexpr long kPilotRows = 100000;

struct BinaryDgp {
  long n = 4000;
  Eigen::Vector3d beta{2.0, 2.0, 2.0};
  double intercept = 0.0;
  std::optional<double> target_prevalence;  // calibrates the intercept when set
};

struct OrderedDgp {
  long n = 6000;
  Eigen::Vector3d beta{2.0, 2.0, 2.0};
  std::vector<double> thresholds;                         // M-1, strictly increasing
  std::optional<std::vector<double>> target_proportions;  // M entries, sum 1
};

// Bisection on a pilot sample so the simulated prevalence hits the target.
double calibrate_intercept(const Eigen::Vector3d& beta, double prevalence, std::uint64_t seed);
// Pilot-quantile thresholds hitting the target class proportions.
std::vector<double> calibrate_thresholds(const Eigen::Vector3d& beta,
                                         const std::vector<double>& proportions,
                                         std::uint64_t seed);

DataSchema binary_dgp_schema();
DataSchema ordered_dgp_schema(int n_classes);

struct SimulatedBinary {
  Dataset data;
  std::vector<double> true_p;  // P(Y=1 | x) per row
  int resample_attempts = 0;   // degenerate single-class draws redrawn
};

struct SimulatedOrdered {
  Dataset data;
  Eigen::MatrixXd true_probs;  // n x M
  int resample_attempts = 0;
};

SimulatedBinary simulate_binary(const BinaryDgp& dgp, std::uint64_t seed);
SimulatedOrdered simulate_ordered(const OrderedDgp& dgp, std::uint64_t seed);

enum class Treatment { none, imbalanced, ru, ctgan_ru };
Treatment treatment_from_name(const std::string& name);
std::string treatment_name(Treatment t);

struct Scenario {
  enum class Kind { binary, ordered } kind = Kind::binary;
  std::string name;  // condition label in artifacts
  BinaryDgp binary_dgp;
  OrderedDgp ordered_dgp;
  Treatment treatment = Treatment::none;

  // Pool imbalancing applied to each simulated draw before the treatment.
  // Binary: the imbalance class is subsampled to majority/pool_ratio rows.
  std::optional<double> pool_ratio;
  int imbalance_class = 1;
  // Ordered: per-class keep fractions (empty = keep all).
  std::vector<double> pool_keep;

  // Rebalancing rule: final minority target T = round(minority_scale * pool
  // minority count); majority target = round(final_ratio * T).
  double final_ratio = 1.0;
  double minority_scale = 2.0;
  ctgan::CtganConfig ctgan_config;

  bool store_probabilities = false;
};

struct ProbRecord {
  Eigen::MatrixXd true_probs;       // N x M
  Eigen::MatrixXd predicted_probs;  // N x M
};

// Exact triple average over replications, rows, and classes of the squared
// class-probability error.
double amse(std::span<const ProbRecord> records);

struct BoxStats {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;  // Tukey 1.5 IQR
  double whisker_hi = 0.0;
};

BoxStats box_stats(std::vector<double> values);

struct ReplicationSummary {
  std::string scenario_name;
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd estimates;  // successful replications x parameters
  std::vector<int> replication_ids;
  std::vector<double> rep_mse;
  std::vector<BoxStats> box;  // per parameter
  double amse = 0.0;
  int requested = 0;
  int failed = 0;
  std::vector<std::string> failure_messages;
  double calibrated_intercept = 0.0;        // binary scenarios
  std::vector<double> calibrated_thresholds;  // ordered scenarios
  std::vector<ProbRecord> probability_records;  // when requested
};

// Per replication r: simulate with seed base_seed + r, imbalance/rebalance,
// fit, and score predicted class probabilities on the simulated rows against
// the stored truth. Fit failures are excluded and counted; more than 5%
// failures abort the run. Replications may run on several threads; results
// are reduced in replication order.
ReplicationSummary run_replications(const Scenario& scenario, int replications,
                                    std::uint64_t base_seed, int n_threads = 0);

}  // namespace rebal::mc
