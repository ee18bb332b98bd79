#include "rebal/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rebal/mode_norm.hpp"

namespace rebal::resampling {

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& data) {
  auto label = static_cast<std::size_t>(data.schema().label_index());
  std::vector<std::vector<std::size_t>> out(
      static_cast<std::size_t>(data.schema().n_label_classes()));
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    out[static_cast<std::size_t>(data.at(r, label))].push_back(r);
  return out;
}

std::string class_name(const Dataset& data, int category) {
  const auto& col = data.schema().column(data.schema().label_index());
  return col.categories.at(static_cast<std::size_t>(category));
}

// Generates n rows conditioned on the label class and appends them carrying
// that label.
Dataset ctgan_append(const Dataset& data, const ctgan::CtganModel& model, int label_class,
                     long n, std::uint64_t seed) {
  const auto& schema = data.schema();
  ctgan::Condition cond{schema.label_column,
                        schema.column(schema.label_index()).categories.at(
                            static_cast<std::size_t>(label_class))};
  Dataset generated = ctgan::generate(model, n, cond, seed);

  Dataset out = data;
  auto label = static_cast<std::size_t>(schema.label_index());
  std::vector<double> row(schema.columns.size());
  for (std::size_t r = 0; r < generated.n_rows(); ++r) {
    auto src = generated.row(r);
    std::copy(src.begin(), src.end(), row.begin());
    row[label] = static_cast<double>(label_class);
    out.append_row(row);
  }
  return out;
}

}  // namespace

Method method_from_name(const std::string& name) {
  if (name == "ru") return Method::ru;
  if (name == "smote_nc") return Method::smote_nc;
  if (name == "ctgan") return Method::ctgan;
  if (name == "ctgan_ru") return Method::ctgan_ru;
  throw ConfigError("unknown resampling method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::ru: return "ru";
    case Method::smote_nc: return "smote_nc";
    case Method::ctgan: return "ctgan";
    case Method::ctgan_ru: return "ctgan_ru";
  }
  return "?";
}

void ResamplePlan::validate(const Dataset& data) const {
  auto counts = data.class_counts();
  auto check_targets = [&](const std::map<int, long>& ts) {
    for (const auto& [cat, target] : ts) {
      if (cat < 0 || cat >= static_cast<int>(counts.size()))
        throw ConfigError("resample plan: unknown label class index " + std::to_string(cat));
      if (target < 1) throw ConfigError("resample plan: targets must be >= 1");
    }
  };
  check_targets(targets);
  check_targets(ru_targets);
}

Dataset random_undersample(const Dataset& data, const std::map<int, long>& targets,
                           std::uint64_t seed) {
  auto by_class = rows_by_class(data);
  Rng rng = Rng::substream(seed, "ru");

  std::vector<std::size_t> keep;
  keep.reserve(data.n_rows());
  for (std::size_t cat = 0; cat < by_class.size(); ++cat) {
    auto& rows = by_class[cat];
    auto it = targets.find(static_cast<int>(cat));
    if (it == targets.end()) {
      keep.insert(keep.end(), rows.begin(), rows.end());
      continue;
    }
    long target = it->second;
    if (target > static_cast<long>(rows.size()))
      throw ConfigError("random_undersample: target " + std::to_string(target) + " for class '" +
                        class_name(data, static_cast<int>(cat)) + "' exceeds available " +
                        std::to_string(rows.size()));
    rng.shuffle(rows);
    keep.insert(keep.end(), rows.begin(), rows.begin() + target);
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

Dataset smote_nc(const Dataset& data, int minority_class, int k_neighbors, long n_synthetic,
                 std::uint64_t seed) {
  const auto& schema = data.schema();
  if (n_synthetic < 0) throw ConfigError("smote_nc: negative synthetic count");
  if (k_neighbors < 1) throw ConfigError("smote_nc: k_neighbors must be >= 1");

  std::vector<std::size_t> cont_cols, nom_cols;
  for (std::size_t c = 0; c < schema.columns.size(); ++c)
    (schema.columns[c].kind == ColumnKind::continuous ? cont_cols : nom_cols).push_back(c);
  if (cont_cols.empty())
    throw ConfigError("smote_nc: needs at least one continuous column");

  auto by_class = rows_by_class(data);
  if (minority_class < 0 || minority_class >= static_cast<int>(by_class.size()))
    throw ConfigError("smote_nc: bad minority class index");
  const auto& minority = by_class[static_cast<std::size_t>(minority_class)];
  auto m = static_cast<long>(minority.size());
  if (m <= k_neighbors)
    throw ConfigError("smote_nc: minority class has " + std::to_string(m) +
                      " rows, need more than k_neighbors = " + std::to_string(k_neighbors));

  Dataset out = data;
  if (n_synthetic == 0) return out;

  // Standardize continuous features by their minority-class deviation; each
  // nominal mismatch contributes med^2, the median of the standardized
  // features' deviations.
  std::vector<double> sd(cont_cols.size(), 0.0);
  for (std::size_t j = 0; j < cont_cols.size(); ++j) {
    std::vector<double> vals(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i) vals[i] = data.at(minority[i], cont_cols[j]);
    sd[j] = std::max(std::sqrt(variance_of(vals)), modenorm::kStdFloor);
  }
  std::vector<double> standardized_sd(cont_cols.size());
  for (std::size_t j = 0; j < cont_cols.size(); ++j) {
    std::vector<double> vals(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i)
      vals[i] = data.at(minority[i], cont_cols[j]) / sd[j];
    standardized_sd[j] = std::sqrt(variance_of(vals));
  }
  double med = median_of(standardized_sd);
  double mismatch_penalty = med * med;

  auto distance2 = [&](std::size_t a, std::size_t b) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < cont_cols.size(); ++j) {
      double diff = (data.at(a, cont_cols[j]) - data.at(b, cont_cols[j])) / sd[j];
      d2 += diff * diff;
    }
    for (std::size_t c : nom_cols)
      if (data.at(a, c) != data.at(b, c)) d2 += mismatch_penalty;
    return d2;
  };

  // Brute-force k nearest minority neighbours, ties broken by row index.
  auto k = static_cast<std::size_t>(k_neighbors);
  std::vector<std::vector<std::size_t>> neighbors(minority.size());
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < minority.size(); ++i) {
    cand.clear();
    for (std::size_t j = 0; j < minority.size(); ++j) {
      if (j == i) continue;
      cand.emplace_back(distance2(minority[i], minority[j]), j);
    }
    std::sort(cand.begin(), cand.end());
    neighbors[i].reserve(k);
    for (std::size_t t = 0; t < k; ++t) neighbors[i].push_back(cand[t].second);
  }

  Rng rng = Rng::substream(seed, "smote");
  std::vector<double> synthetic(schema.columns.size());
  std::vector<long> votes;
  for (long s = 0; s < n_synthetic; ++s) {
    auto i = static_cast<std::size_t>(rng.uniform_int(minority.size()));
    auto pick = neighbors[i][rng.uniform_int(k)];
    double t = rng.uniform_open01();

    std::size_t base = minority[i];
    std::size_t nb = minority[pick];
    for (std::size_t j = 0; j < cont_cols.size(); ++j) {
      double a = data.at(base, cont_cols[j]);
      double b = data.at(nb, cont_cols[j]);
      synthetic[cont_cols[j]] = a + t * (b - a);
    }
    for (std::size_t c : nom_cols) {
      const auto& col = schema.columns[c];
      votes.assign(col.categories.size(), 0);
      for (std::size_t nn : neighbors[i])
        ++votes[static_cast<std::size_t>(data.at(minority[nn], c))];
      long best = 0;
      for (std::size_t v = 1; v < votes.size(); ++v)
        if (votes[v] > votes[static_cast<std::size_t>(best)]) best = static_cast<long>(v);
      synthetic[c] = static_cast<double>(best);
    }
    synthetic[static_cast<std::size_t>(schema.label_index())] =
        static_cast<double>(minority_class);
    out.append_row(synthetic);
  }
  return out;
}

Dataset ctgan_oversample(const Dataset& data, int minority_class, long target_count,
                         const ctgan::CtganConfig& config) {
  auto counts = data.class_counts();
  if (minority_class < 0 || minority_class >= static_cast<int>(counts.size()))
    throw ConfigError("ctgan_oversample: bad minority class index");
  long current = counts[static_cast<std::size_t>(minority_class)];
  if (target_count < current)
    throw ConfigError("ctgan_oversample: target " + std::to_string(target_count) +
                      " below current count " + std::to_string(current));
  if (target_count == current) return data;

  ctgan::CtganModel model = ctgan::train(data, config);
  return ctgan_append(data, model, minority_class, target_count - current,
                      Rng::substream_seed(config.seed, "oversample"));
}

Dataset ctgan_ru(const Dataset& data, const std::map<int, long>& ru_targets,
                 const std::map<int, long>& final_targets, const ctgan::CtganConfig& config) {
  Dataset reduced = random_undersample(data, ru_targets,
                                       Rng::substream_seed(config.seed, "ctgan-ru"));

  auto counts = reduced.class_counts();
  for (const auto& [cat, target] : final_targets) {
    if (cat < 0 || cat >= static_cast<int>(counts.size()))
      throw ConfigError("ctgan_ru: unknown label class index " + std::to_string(cat));
    if (target < counts[static_cast<std::size_t>(cat)])
      throw ConfigError("ctgan_ru: final target " + std::to_string(target) + " for class '" +
                        class_name(data, cat) + "' below post-undersampling count " +
                        std::to_string(counts[static_cast<std::size_t>(cat)]));
  }

  bool needs_generation = false;
  for (const auto& [cat, target] : final_targets)
    if (target > counts[static_cast<std::size_t>(cat)]) needs_generation = true;
  if (!needs_generation) return reduced;

  ctgan::CtganModel model = ctgan::train(reduced, config);
  Dataset out = reduced;
  for (const auto& [cat, target] : final_targets) {
    long need = target - counts[static_cast<std::size_t>(cat)];
    if (need <= 0) continue;
    out = ctgan_append(out, model, cat, need,
                       Rng::substream_seed(config.seed, "ctgan-ru:gen:" + std::to_string(cat)));
  }
  return out;
}

Dataset apply(const Dataset& data, const ResamplePlan& plan) {
  plan.validate(data);
  switch (plan.method) {
    case Method::ru:
      return random_undersample(data, plan.targets, plan.seed);
    case Method::smote_nc: {
      if (plan.minority_class < 0) throw ConfigError("smote_nc plan: minority class required");
      auto counts = data.class_counts();
      auto it = plan.targets.find(plan.minority_class);
      if (it == plan.targets.end())
        throw ConfigError("smote_nc plan: no target for the minority class");
      long need = it->second - counts[static_cast<std::size_t>(plan.minority_class)];
      if (need < 0) throw ConfigError("smote_nc plan: target below current count");
      return smote_nc(data, plan.minority_class, plan.k_neighbors, need, plan.seed);
    }
    case Method::ctgan: {
      if (plan.minority_class < 0) throw ConfigError("ctgan plan: minority class required");
      auto it = plan.targets.find(plan.minority_class);
      if (it == plan.targets.end())
        throw ConfigError("ctgan plan: no target for the minority class");
      auto cfg = plan.ctgan_config;
      cfg.seed = Rng::substream_seed(plan.seed, "ctgan");
      return ctgan_oversample(data, plan.minority_class, it->second, cfg);
    }
    case Method::ctgan_ru: {
      auto cfg = plan.ctgan_config;
      cfg.seed = Rng::substream_seed(plan.seed, "ctgan");
      return ctgan_ru(data, plan.ru_targets, plan.targets, cfg);
    }
  }
  throw ConfigError("resample: unknown method");
}

}  // namespace rebal::resampling
