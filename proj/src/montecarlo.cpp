#include "rebal/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "rebal/resampling.hpp"

namespace rebal::mc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PilotSample {
  MatrixXd features;  // n x 3
  VectorXd eta;       // features * beta
};

PilotSample draw_pilot(const Eigen::Vector3d& beta, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "pilot");
  PilotSample pilot;
  pilot.features.resize(kPilotRows, 3);
  for (long r = 0; r < kPilotRows; ++r) {
    pilot.features(r, 0) = rng.normal();
    pilot.features(r, 1) = rng.normal();
    pilot.features(r, 2) = rng.bernoulli(kBernoulliRate) ? 1.0 : 0.0;
  }
  pilot.eta = pilot.features * beta;
  return pilot;
}

void fill_features(Dataset& data, std::vector<double>& row, double x1, double x2, double x3) {
  row[0] = x1;
  row[1] = x2;
  row[2] = x3;
  (void)data;
}

}  // namespace

double calibrate_intercept(const Eigen::Vector3d& beta, double prevalence, std::uint64_t seed) {
  if (!(prevalence > 0.0 && prevalence < 1.0))
    throw ConfigError("calibrate_intercept: prevalence must lie in (0,1)");
  PilotSample pilot = draw_pilot(beta, seed);
  auto mean_prob = [&](double b0) {
    double acc = 0.0;
    for (long r = 0; r < kPilotRows; ++r) acc += sigmoid(b0 + pilot.eta[r]);
    return acc / static_cast<double>(kPilotRows);
  };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double p = mean_prob(mid);
    if (std::abs(p - prevalence) < 1e-6) return mid;
    (p < prevalence ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> calibrate_thresholds(const Eigen::Vector3d& beta,
                                         const std::vector<double>& proportions,
                                         std::uint64_t seed) {
  if (proportions.size() < 3) throw ConfigError("calibrate_thresholds: need >= 3 proportions");
  double total = 0.0;
  for (double p : proportions) {
    if (!(p > 0.0)) throw ConfigError("calibrate_thresholds: proportions must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw ConfigError("calibrate_thresholds: proportions must sum to 1");

  PilotSample pilot = draw_pilot(beta, seed);
  Rng rng = Rng::substream(seed, "pilot-noise");
  std::vector<double> ystar(static_cast<std::size_t>(kPilotRows));
  for (long r = 0; r < kPilotRows; ++r)
    ystar[static_cast<std::size_t>(r)] = pilot.eta[r] + rng.logistic();
  std::sort(ystar.begin(), ystar.end());

  std::vector<double> thresholds;
  double cum = 0.0;
  for (std::size_t m = 0; m + 1 < proportions.size(); ++m) {
    cum += proportions[m];
    thresholds.push_back(quantile_sorted(ystar, cum));
  }
  return thresholds;
}

DataSchema binary_dgp_schema() {
  DataSchema schema;
  schema.columns = {{"x1", ColumnKind::continuous, {}},
                    {"x2", ColumnKind::continuous, {}},
                    {"x3", ColumnKind::discrete, {"0", "1"}},
                    {"y", ColumnKind::discrete, {"0", "1"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  return schema;
}

DataSchema ordered_dgp_schema(int n_classes) {
  DataSchema schema;
  std::vector<std::string> classes;
  for (int m = 0; m < n_classes; ++m) classes.push_back(std::to_string(m));
  schema.columns = {{"x1", ColumnKind::continuous, {}},
                    {"x2", ColumnKind::continuous, {}},
                    {"x3", ColumnKind::discrete, {"0", "1"}},
                    {"y", ColumnKind::discrete, classes}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::ordered;
  return schema;
}

SimulatedBinary simulate_binary(const BinaryDgp& dgp, std::uint64_t seed) {
  if (dgp.n < 100) throw ConfigError("simulate_binary: n must be >= 100");
  double intercept = dgp.intercept;
  if (dgp.target_prevalence)
    intercept = calibrate_intercept(dgp.beta, *dgp.target_prevalence,
                                    Rng::substream_seed(seed, "calibrate"));

  SimulatedBinary sim;
  sim.data = Dataset(binary_dgp_schema());
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100) throw NumericalError("simulate_binary: degenerate draws persisted");
    Rng rng = Rng::substream(seed, "dgp:" + std::to_string(attempt));
    Dataset data(binary_dgp_schema());
    data.reserve(static_cast<std::size_t>(dgp.n));
    std::vector<double> true_p;
    true_p.reserve(static_cast<std::size_t>(dgp.n));
    std::vector<double> row(4);
    long positives = 0;
    for (long r = 0; r < dgp.n; ++r) {
      double x1 = rng.normal();
      double x2 = rng.normal();
      double x3 = rng.bernoulli(kBernoulliRate) ? 1.0 : 0.0;
      double p = sigmoid(intercept + dgp.beta[0] * x1 + dgp.beta[1] * x2 + dgp.beta[2] * x3);
      int y = rng.bernoulli(p) ? 1 : 0;
      positives += y;
      fill_features(data, row, x1, x2, x3);
      row[3] = y;
      data.append_row(row);
      true_p.push_back(p);
    }
    if (positives == 0 || positives == dgp.n) {
      sim.resample_attempts = attempt + 1;
      continue;
    }
    sim.data = std::move(data);
    sim.true_p = std::move(true_p);
    break;
  }
  return sim;
}

SimulatedOrdered simulate_ordered(const OrderedDgp& dgp, std::uint64_t seed) {
  if (dgp.n < 100) throw ConfigError("simulate_ordered: n must be >= 100");
  std::vector<double> thresholds = dgp.thresholds;
  if (dgp.target_proportions)
    thresholds = calibrate_thresholds(dgp.beta, *dgp.target_proportions,
                                      Rng::substream_seed(seed, "calibrate"));
  if (thresholds.size() < 2) throw ConfigError("simulate_ordered: need >= 2 thresholds");
  for (std::size_t m = 1; m < thresholds.size(); ++m)
    if (!(thresholds[m] > thresholds[m - 1]))
      throw ConfigError("simulate_ordered: thresholds must increase");

  int m_classes = static_cast<int>(thresholds.size()) + 1;
  SimulatedOrdered sim;

  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100) throw NumericalError("simulate_ordered: degenerate draws persisted");
    Rng rng = Rng::substream(seed, "dgp:" + std::to_string(attempt));
    Dataset data(ordered_dgp_schema(m_classes));
    data.reserve(static_cast<std::size_t>(dgp.n));
    MatrixXd probs(dgp.n, m_classes);
    std::vector<long> counts(static_cast<std::size_t>(m_classes), 0);
    std::vector<double> row(4);
    for (long r = 0; r < dgp.n; ++r) {
      double x1 = rng.normal();
      double x2 = rng.normal();
      double x3 = rng.bernoulli(kBernoulliRate) ? 1.0 : 0.0;
      double eta = dgp.beta[0] * x1 + dgp.beta[1] * x2 + dgp.beta[2] * x3;
      double ystar = eta + rng.logistic();
      int y = m_classes - 1;
      for (int m = 0; m < m_classes - 1; ++m)
        if (ystar <= thresholds[static_cast<std::size_t>(m)]) {
          y = m;
          break;
        }
      double prev = 0.0;
      for (int m = 0; m < m_classes; ++m) {
        double cum = m < m_classes - 1
                         ? sigmoid(thresholds[static_cast<std::size_t>(m)] - eta)
                         : 1.0;
        probs(r, m) = cum - prev;
        prev = cum;
      }
      ++counts[static_cast<std::size_t>(y)];
      fill_features(data, row, x1, x2, x3);
      row[3] = y;
      data.append_row(row);
    }
    if (*std::min_element(counts.begin(), counts.end()) == 0) {
      sim.resample_attempts = attempt + 1;
      continue;
    }
    sim.data = std::move(data);
    sim.true_probs = std::move(probs);
    break;
  }
  return sim;
}

Treatment treatment_from_name(const std::string& name) {
  if (name == "none") return Treatment::none;
  if (name == "imbalanced") return Treatment::imbalanced;
  if (name == "ru") return Treatment::ru;
  if (name == "ctgan_ru") return Treatment::ctgan_ru;
  throw ConfigError("unknown treatment '" + name + "'");
}

std::string treatment_name(Treatment t) {
  switch (t) {
    case Treatment::none: return "none";
    case Treatment::imbalanced: return "imbalanced";
    case Treatment::ru: return "ru";
    case Treatment::ctgan_ru: return "ctgan_ru";
  }
  return "?";
}

double amse(std::span<const ProbRecord> records) {
  if (records.empty()) throw DataError("amse: no records");
  auto n = records.front().true_probs.rows();
  auto m = records.front().true_probs.cols();
  double acc = 0.0;
  for (const auto& rec : records) {
    if (rec.true_probs.rows() != n || rec.true_probs.cols() != m ||
        rec.predicted_probs.rows() != n || rec.predicted_probs.cols() != m)
      throw DataError("amse: record shape mismatch");
    acc += (rec.true_probs - rec.predicted_probs).array().square().sum() /
           (static_cast<double>(n) * static_cast<double>(m));
  }
  return acc / static_cast<double>(records.size());
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw DataError("box_stats: no values");
  BoxStats st;
  st.mean = mean_of(values);
  std::sort(values.begin(), values.end());
  st.median = quantile_sorted(values, 0.5);
  st.q1 = quantile_sorted(values, 0.25);
  st.q3 = quantile_sorted(values, 0.75);
  double iqr = st.q3 - st.q1;
  double lo_fence = st.q1 - 1.5 * iqr;
  double hi_fence = st.q3 + 1.5 * iqr;
  st.whisker_lo = values.back();
  st.whisker_hi = values.front();
  for (double v : values) {
    if (v >= lo_fence) {
      st.whisker_lo = v;
      break;
    }
  }
  for (auto it = values.rbegin(); it != values.rend(); ++it) {
    if (*it <= hi_fence) {
      st.whisker_hi = *it;
      break;
    }
  }
  return st;
}

namespace {

// Subsamples classes of the simulated draw to build the imbalanced pool.
Dataset build_pool(const Scenario& sc, const Dataset& data, std::uint64_t seed) {
  auto counts = data.class_counts();
  std::map<int, long> targets;
  if (sc.kind == Scenario::Kind::binary) {
    if (!sc.pool_ratio) return data;
    if (!(*sc.pool_ratio > 0.0)) throw ConfigError("scenario: pool_ratio must be > 0");
    long majority = 0;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (static_cast<int>(c) != sc.imbalance_class) majority = std::max(majority, counts[c]);
    long target = std::max(1L, static_cast<long>(std::llround(
                                   static_cast<double>(majority) / *sc.pool_ratio)));
    target = std::min(target, counts[static_cast<std::size_t>(sc.imbalance_class)]);
    targets[sc.imbalance_class] = target;
  } else {
    if (sc.pool_keep.empty()) return data;
    if (sc.pool_keep.size() != counts.size())
      throw ConfigError("scenario: pool_keep needs one fraction per class");
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (!(sc.pool_keep[c] > 0.0 && sc.pool_keep[c] <= 1.0))
        throw ConfigError("scenario: pool_keep fractions must lie in (0,1]");
      if (sc.pool_keep[c] < 1.0)
        targets[static_cast<int>(c)] = std::max(
            1L, static_cast<long>(std::llround(sc.pool_keep[c] * static_cast<double>(counts[c]))));
    }
  }
  if (targets.empty()) return data;
  return resampling::random_undersample(data, targets, seed);
}

Dataset apply_treatment(const Scenario& sc, const Dataset& pool, std::uint64_t seed) {
  if (sc.treatment == Treatment::none || sc.treatment == Treatment::imbalanced) return pool;

  auto counts = pool.class_counts();
  auto min_it = std::min_element(counts.begin(), counts.end());
  int min_class = static_cast<int>(min_it - counts.begin());
  long m = *min_it;

  if (sc.treatment == Treatment::ru) {
    long majority_target = std::max(1L, static_cast<long>(std::llround(sc.final_ratio *
                                                                       static_cast<double>(m))));
    std::map<int, long> targets;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (static_cast<int>(c) != min_class && counts[c] > majority_target)
        targets[static_cast<int>(c)] = majority_target;
    if (targets.empty()) return pool;
    return resampling::random_undersample(pool, targets, Rng::substream_seed(seed, "ru"));
  }

  // ctgan_ru: minority target T = round(scale * m), majority target = round(k*T).
  long t = std::max(2L, static_cast<long>(std::llround(sc.minority_scale * static_cast<double>(m))));
  long majority_target = std::max(t, static_cast<long>(std::llround(sc.final_ratio *
                                                                    static_cast<double>(t))));
  std::map<int, long> ru_targets, final_targets;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > majority_target) ru_targets[static_cast<int>(c)] = majority_target;
    if (counts[c] < t)
      final_targets[static_cast<int>(c)] = t;
    else
      final_targets[static_cast<int>(c)] = std::min(counts[c], majority_target);
  }
  auto cfg = sc.ctgan_config;
  cfg.seed = Rng::substream_seed(seed, "ctgan");
  return resampling::ctgan_ru(pool, ru_targets, final_targets, cfg);
}

struct RepOutcome {
  bool ok = false;
  std::string message;
  VectorXd estimates;
  double mse = 0.0;
  ProbRecord record;
};

RepOutcome run_one_binary(const Scenario& sc, double intercept, int rep, std::uint64_t base_seed) {
  RepOutcome out;
  BinaryDgp dgp = sc.binary_dgp;
  dgp.intercept = intercept;
  dgp.target_prevalence.reset();
  auto rep_seed = base_seed + static_cast<std::uint64_t>(rep);
  SimulatedBinary sim = simulate_binary(dgp, rep_seed);

  Dataset pool = build_pool(sc, sim.data, Rng::substream_seed(rep_seed, "pool"));
  Dataset training = apply_treatment(sc, pool, Rng::substream_seed(rep_seed, "treatment"));

  auto design = glm::make_design(training, true);
  auto fit = glm::fit_binary_logit(design);

  auto eval = glm::make_design(sim.data, true);
  VectorXd eta = eval.features * fit.coefficients;
  auto n = eta.size();
  out.record.true_probs.resize(n, 2);
  out.record.predicted_probs.resize(n, 2);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double p_true = sim.true_p[static_cast<std::size_t>(i)];
    double p_hat = sigmoid(eta[i]);
    out.record.true_probs(i, 0) = 1.0 - p_true;
    out.record.true_probs(i, 1) = p_true;
    out.record.predicted_probs(i, 0) = 1.0 - p_hat;
    out.record.predicted_probs(i, 1) = p_hat;
    acc += (p_true - p_hat) * (p_true - p_hat);  // both classes share the square
  }
  out.mse = acc / static_cast<double>(n);
  out.estimates = fit.coefficients;
  out.ok = true;
  return out;
}

RepOutcome run_one_ordered(const Scenario& sc, const std::vector<double>& thresholds, int rep,
                           std::uint64_t base_seed) {
  RepOutcome out;
  OrderedDgp dgp = sc.ordered_dgp;
  dgp.thresholds = thresholds;
  dgp.target_proportions.reset();
  auto rep_seed = base_seed + static_cast<std::uint64_t>(rep);
  SimulatedOrdered sim = simulate_ordered(dgp, rep_seed);
  int m_classes = static_cast<int>(sim.true_probs.cols());

  Dataset pool = build_pool(sc, sim.data, Rng::substream_seed(rep_seed, "pool"));
  Dataset training = apply_treatment(sc, pool, Rng::substream_seed(rep_seed, "treatment"));

  auto design = glm::make_design(training, false);
  auto fit = glm::fit_ordered_logit(design, m_classes);

  auto eval = glm::make_design(sim.data, false);
  auto n = eval.features.rows();
  out.record.true_probs = sim.true_probs;
  out.record.predicted_probs.resize(n, m_classes);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd probs = glm::predict_class_probs(fit, eval.features.row(i).transpose());
    out.record.predicted_probs.row(i) = probs.transpose();
    acc += (sim.true_probs.row(i).transpose() - probs).squaredNorm() /
           static_cast<double>(m_classes);
  }
  out.mse = acc / static_cast<double>(n);

  out.estimates.resize(fit.coefficients.size() + fit.thresholds.size());
  out.estimates << fit.coefficients, fit.thresholds;
  out.ok = true;
  return out;
}

}  // namespace

ReplicationSummary run_replications(const Scenario& scenario, int replications,
                                    std::uint64_t base_seed, int n_threads) {
  if (replications < 1) throw ConfigError("run_replications: R must be >= 1");

  ReplicationSummary summary;
  summary.scenario_name = scenario.name;
  summary.requested = replications;

  double intercept = scenario.binary_dgp.intercept;
  std::vector<double> thresholds = scenario.ordered_dgp.thresholds;
  if (scenario.kind == Scenario::Kind::binary) {
    if (scenario.binary_dgp.target_prevalence)
      intercept = calibrate_intercept(scenario.binary_dgp.beta,
                                      *scenario.binary_dgp.target_prevalence,
                                      Rng::substream_seed(base_seed, "calibrate"));
    summary.calibrated_intercept = intercept;
  } else {
    if (scenario.ordered_dgp.target_proportions)
      thresholds = calibrate_thresholds(scenario.ordered_dgp.beta,
                                        *scenario.ordered_dgp.target_proportions,
                                        Rng::substream_seed(base_seed, "calibrate"));
    summary.calibrated_thresholds = thresholds;
  }

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(replications));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      int rep = next.fetch_add(1);
      if (rep >= replications) break;
      auto& out = outcomes[static_cast<std::size_t>(rep)];
      try {
        out = scenario.kind == Scenario::Kind::binary
                  ? run_one_binary(scenario, intercept, rep, base_seed)
                  : run_one_ordered(scenario, thresholds, rep, base_seed);
      } catch (const std::exception& e) {
        out.ok = false;
        out.message = e.what();
      }
    }
  };

  int threads = n_threads > 0 ? n_threads
                              : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, replications);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Deterministic reduction in replication order.
  std::vector<VectorXd> estimates;
  for (int rep = 0; rep < replications; ++rep) {
    auto& out = outcomes[static_cast<std::size_t>(rep)];
    if (!out.ok) {
      ++summary.failed;
      summary.failure_messages.push_back("replication " + std::to_string(rep) + ": " +
                                         out.message);
      continue;
    }
    estimates.push_back(out.estimates);
    summary.replication_ids.push_back(rep);
    summary.rep_mse.push_back(out.mse);
    if (scenario.store_probabilities) summary.probability_records.push_back(std::move(out.record));
  }

  if (summary.failed * 20 > replications)
    throw NumericalError("run_replications: " + std::to_string(summary.failed) + " of " +
                         std::to_string(replications) + " replications failed (> 5%); first: " +
                         summary.failure_messages.front());
  if (estimates.empty()) throw NumericalError("run_replications: no successful replications");

  if (scenario.kind == Scenario::Kind::binary) {
    summary.parameter_names = {"(intercept)", "x1", "x2", "x3=1"};
  } else {
    summary.parameter_names = {"x1", "x2", "x3=1"};
    for (std::size_t m = 0; m + 1 < thresholds.size() + 1; ++m)
      summary.parameter_names.push_back("threshold_" + std::to_string(m + 1));
  }

  summary.estimates.resize(static_cast<Eigen::Index>(estimates.size()), estimates.front().size());
  for (std::size_t r = 0; r < estimates.size(); ++r)
    summary.estimates.row(static_cast<Eigen::Index>(r)) = estimates[r].transpose();

  for (Eigen::Index p = 0; p < summary.estimates.cols(); ++p) {
    std::vector<double> vals(static_cast<std::size_t>(summary.estimates.rows()));
    for (Eigen::Index r = 0; r < summary.estimates.rows(); ++r)
      vals[static_cast<std::size_t>(r)] = summary.estimates(r, p);
    summary.box.push_back(box_stats(std::move(vals)));
  }

  double acc = 0.0;
  for (double v : summary.rep_mse) acc += v;
  summary.amse = acc / static_cast<double>(summary.rep_mse.size());
  return summary;
}

}  // namespace rebal::mc
