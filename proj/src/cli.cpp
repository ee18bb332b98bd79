#include "rebal/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "rebal/ctgan.hpp"
#include "rebal/evalkit.hpp"
#include "rebal/glm.hpp"
#include "rebal/keyval.hpp"
#include "rebal/montecarlo.hpp"
#include "rebal/resampling.hpp"
#include "rebal/tabular.hpp"
#include "rebal/version.hpp"

namespace rebal::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

// Effective configuration: optional file plus command-line overrides.
struct CommandConfig {
  KeyValueFile kv;

  static CommandConfig assemble(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
    CommandConfig cfg;
    if (!config_path.empty())
      cfg.kv = load_keyvalue(config_path);
    else
      cfg.kv.origin = "<command line>";
    for (const auto& item : overrides) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("override '" + item + "' is not key=value");
      cfg.kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    return cfg;
  }

  std::uint64_t seed() const {
    if (!kv.has("seed")) throw ConfigError("seed is mandatory (set seed = <integer>)");
    long s = kv.get_long("seed");
    if (s < 0) throw ConfigError("seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  }

  fs::path out_dir() const {
    auto out = kv.get("out");
    if (!out || out->empty()) throw ConfigError("output directory is mandatory (set out = <dir>)");
    fs::path dir(*out);
    fs::create_directories(dir);
    return dir;
  }

  std::string require_path(const std::string& key) const {
    std::string p = kv.require(key);
    if (!fs::exists(p)) throw ConfigError(key + ": file not found: " + p);
    return p;
  }
};

void write_manifest(const fs::path& dir, const std::string& command, const CommandConfig& cfg) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = cfg.kv.canonical();
  m["config_digest"] = hex64(cfg.kv.digest());
  if (cfg.kv.has("seed")) m["seed"] = cfg.kv.get_long("seed");
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

ctgan::CtganConfig ctgan_config_from(const CommandConfig& cfg, std::uint64_t seed) {
  ctgan::CtganConfig c;
  c.epochs = static_cast<int>(cfg.kv.get_long_or("ctgan.epochs", c.epochs));
  c.batch_size = static_cast<int>(cfg.kv.get_long_or("ctgan.batch_size", c.batch_size));
  c.pac = static_cast<int>(cfg.kv.get_long_or("ctgan.pac", c.pac));
  c.z_dim = static_cast<int>(cfg.kv.get_long_or("ctgan.z_dim", c.z_dim));
  c.lr_generator = cfg.kv.get_real_or("ctgan.lr_generator", c.lr_generator);
  c.lr_discriminator = cfg.kv.get_real_or("ctgan.lr_discriminator", c.lr_discriminator);
  c.gumbel_temperature = cfg.kv.get_real_or("ctgan.gumbel_temperature", c.gumbel_temperature);
  c.leaky_ratio = cfg.kv.get_real_or("ctgan.leaky_ratio", c.leaky_ratio);
  c.dropout_rate = cfg.kv.get_real_or("ctgan.dropout_rate", c.dropout_rate);
  c.seed = seed;
  c.validate();
  return c;
}

// "<category>=<count>" entries accumulated over repeated keys.
std::map<int, long> parse_targets(const CommandConfig& cfg, const DataSchema& schema,
                                  const std::string& key) {
  std::map<int, long> out;
  auto label = schema.label_index();
  for (const auto& entry : cfg.kv.all(key)) {
    auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ConfigError(key + " entries must be <category>=<count>, got '" + entry + "'");
    std::string cat = entry.substr(0, eq);
    int idx = schema.category_index(label, cat);
    if (idx < 0) throw ConfigError(key + ": unknown label category '" + cat + "'");
    long count = std::stol(entry.substr(eq + 1));
    out[idx] = count;
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_resample(const CommandConfig& cfg) {
  auto seed = cfg.seed();
  auto out = cfg.out_dir();
  DataSchema schema = load_schema(cfg.require_path("schema"));
  Dataset data = load_csv(cfg.require_path("data"), schema);

  resampling::ResamplePlan plan;
  plan.method = resampling::method_from_name(cfg.kv.require("method"));
  plan.seed = Rng::substream_seed(seed, "resample");
  plan.targets = parse_targets(cfg, schema, "target");
  plan.ru_targets = parse_targets(cfg, schema, "ru_target");
  plan.k_neighbors = static_cast<int>(cfg.kv.get_long_or("k_neighbors", 5));
  if (cfg.kv.has("minority")) {
    int idx = schema.category_index(schema.label_index(), cfg.kv.require("minority"));
    if (idx < 0) throw ConfigError("minority: unknown label category");
    plan.minority_class = idx;
  }
  plan.ctgan_config = ctgan_config_from(cfg, Rng::substream_seed(seed, "train"));

  Dataset result = resampling::apply(data, plan);
  save_csv(result, (out / "resampled.csv").string());

  json prov;
  prov["method"] = resampling::method_name(plan.method);
  prov["seed"] = static_cast<long>(seed);
  prov["config_digest"] = hex64(cfg.kv.digest());
  auto counts = result.class_counts();
  const auto& cats = schema.column(schema.label_index()).categories;
  for (std::size_t c = 0; c < counts.size(); ++c)
    prov["class_counts"][cats[c]] = counts[c];
  write_text(out / "provenance.json", prov.dump(2) + "\n");
  write_manifest(out, "resample", cfg);

  std::cout << "resampled " << data.n_rows() << " -> " << result.n_rows() << " rows\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_fit(const CommandConfig& cfg) {
  (void)cfg.seed();  // fits are deterministic; the seed is still pinned in the manifest
  auto out = cfg.out_dir();
  DataSchema schema = load_schema(cfg.require_path("schema"));
  Dataset data = load_csv(cfg.require_path("data"), schema);

  bool want_vif = cfg.kv.get_or("vif", "false") == "true";
  std::ostringstream text;
  glm::InferenceReport report;

  if (schema.label_kind == LabelKind::binary) {
    auto design = glm::make_design(data, true);
    if (want_vif) {
      auto vifs = evalkit::vif(design);
      text << "VIF screening:\n";
      for (std::size_t j = 0; j < vifs.size(); ++j)
        text << "  " << design.names[j + 1] << " = " << fmt9(vifs[j]) << "\n";
      text << "\n";
    }
    auto fit = glm::fit_binary_logit(design);
    report = glm::inference_report(fit);
  } else {
    auto design = glm::make_design(data, false);
    if (want_vif) {
      auto vifs = evalkit::vif(design);
      text << "VIF screening:\n";
      for (std::size_t j = 0; j < vifs.size(); ++j)
        text << "  " << design.names[j] << " = " << fmt9(vifs[j]) << "\n";
      text << "\n";
    }
    auto fit = glm::fit_ordered_logit(design, schema.n_label_classes());
    report = glm::inference_report(fit);
  }

  text << report.to_text();
  std::cout << text.str();
  write_text(out / "report.txt", text.str());
  write_text(out / "coefficients.csv", report.to_csv());
  write_manifest(out, "fit", cfg);
  return 0;
}

// ---------------------------------------------------------------------------

struct Predictions {
  std::vector<std::string> labels;           // class names, sorted
  std::vector<int> y_true, y_pred;
};

Predictions load_predictions(const std::string& path, const std::optional<std::string>& positive,
                             double threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int ti = -1, pi = -1, prob_i = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "y_true") ti = static_cast<int>(i);
    if (header[i] == "y_pred") pi = static_cast<int>(i);
    if (header[i] == "p") prob_i = static_cast<int>(i);
  }
  if (ti < 0 || (pi < 0 && prob_i < 0))
    throw DataError(path + ": need columns y_true and y_pred (or p)");

  std::vector<std::string> t_raw, p_raw;
  std::vector<double> probs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": field count mismatch");
    t_raw.push_back(cells[static_cast<std::size_t>(ti)]);
    if (pi >= 0) p_raw.push_back(cells[static_cast<std::size_t>(pi)]);
    if (prob_i >= 0) probs.push_back(std::stod(cells[static_cast<std::size_t>(prob_i)]));
  }
  if (t_raw.empty()) throw DataError(path + ": no prediction rows");

  Predictions out;
  std::map<std::string, int> index;
  for (const auto& v : t_raw) index.emplace(v, 0);
  for (const auto& v : p_raw) index.emplace(v, 0);
  for (auto& [name, idx] : index) {
    idx = static_cast<int>(out.labels.size());
    out.labels.push_back(name);
  }

  if (prob_i >= 0 && pi < 0) {
    if (out.labels.size() != 2)
      throw DataError(path + ": probability column needs exactly 2 classes");
    if (!positive) throw ConfigError("evaluate: positive class required with probabilities");
    int pos = index.count(*positive) ? index[*positive] : -1;
    if (pos < 0) throw ConfigError("evaluate: unknown positive class '" + *positive + "'");
    for (double p : probs) out.y_pred.push_back(p >= threshold ? pos : 1 - pos);
  } else {
    for (const auto& v : p_raw) out.y_pred.push_back(index[v]);
  }
  for (const auto& v : t_raw) out.y_true.push_back(index[v]);
  return out;
}

int cmd_evaluate(const CommandConfig& cfg) {
  (void)cfg.seed();
  auto out = cfg.out_dir();
  std::optional<std::string> positive;
  if (cfg.kv.has("positive")) positive = cfg.kv.require("positive");
  double threshold = cfg.kv.get_real_or("threshold", 0.5);

  Predictions pred =
      load_predictions(cfg.require_path("predictions"), positive, threshold);
  int n_classes = static_cast<int>(pred.labels.size());
  auto cm = evalkit::confusion(pred.y_true, pred.y_pred, n_classes);

  json j;
  j["classes"] = pred.labels;
  j["threshold"] = threshold;
  for (int t = 0; t < n_classes; ++t)
    for (int p = 0; p < n_classes; ++p)
      j["confusion"][pred.labels[static_cast<std::size_t>(t)]]
       [pred.labels[static_cast<std::size_t>(p)]] = cm.counts(t, p);

  if (n_classes == 2) {
    int pos = 1;
    if (positive) {
      pos = -1;
      for (std::size_t i = 0; i < pred.labels.size(); ++i)
        if (pred.labels[i] == *positive) pos = static_cast<int>(i);
      if (pos < 0) throw ConfigError("evaluate: unknown positive class '" + *positive + "'");
    }
    auto rep = evalkit::score(pred.y_true, pred.y_pred, 2, pos);
    j["positive"] = pred.labels[static_cast<std::size_t>(pos)];
    j["sensitivity"] = rep.sensitivity;
    j["specificity"] = rep.specificity;
    j["g_mean"] = rep.g_mean;
    j["degenerate"] = rep.degenerate;
    std::cout << "sensitivity " << fmt9(rep.sensitivity) << "  specificity "
              << fmt9(rep.specificity) << "  g-mean " << fmt9(rep.g_mean) << "\n";
  } else {
    auto rep = evalkit::score_multiclass(pred.y_true, pred.y_pred, n_classes);
    for (int c = 0; c < n_classes; ++c) {
      const auto& r = rep.per_class[static_cast<std::size_t>(c)];
      auto& jc = j["per_class"][pred.labels[static_cast<std::size_t>(c)]];
      jc["sensitivity"] = r.sensitivity;
      jc["specificity"] = r.specificity;
      jc["g_mean"] = r.g_mean;
    }
    j["overall_g_mean"] = rep.overall_g_mean;
    j["degenerate"] = rep.degenerate;
    std::cout << "overall g-mean " << fmt9(rep.overall_g_mean) << "\n";
  }
  write_text(out / "metrics.json", j.dump(2) + "\n");
  write_manifest(out, "evaluate", cfg);
  return 0;
}

// ---------------------------------------------------------------------------

std::string hist_csv(const evalkit::HistogramGrid& grid) {
  std::ostringstream out;
  if (grid.discrete) {
    out << "category,real,synthetic\n";
    for (std::size_t b = 0; b < grid.labels.size(); ++b)
      out << grid.labels[b] << ',' << grid.real_counts[b] << ',' << grid.synthetic_counts[b]
          << '\n';
  } else {
    out << "bin_lo,bin_hi,real,synthetic\n";
    for (std::size_t b = 0; b + 1 < grid.edges.size(); ++b)
      out << fmt9(grid.edges[b]) << ',' << fmt9(grid.edges[b + 1]) << ',' << grid.real_counts[b]
          << ',' << grid.synthetic_counts[b] << '\n';
  }
  return out.str();
}

std::string joint_csv(const evalkit::JointGrid& grid, bool synthetic) {
  const auto& m = synthetic ? grid.synthetic : grid.real;
  std::ostringstream out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  return out.str();
}

int cmd_diagnose(const CommandConfig& cfg) {
  (void)cfg.seed();
  auto out = cfg.out_dir();
  DataSchema schema = load_schema(cfg.require_path("schema"));
  Dataset real = load_csv(cfg.require_path("real"), schema);
  Dataset synthetic = load_csv(cfg.require_path("synthetic"), schema);
  int bins = static_cast<int>(cfg.kv.get_long_or("bins", evalkit::kDefaultBins));

  std::vector<std::string> columns;
  if (cfg.kv.has("columns"))
    columns = cfg.kv.get_list("columns");
  else
    for (const auto& col : schema.columns) columns.push_back(col.name);

  json div;
  for (const auto& col : columns) {
    auto grid = evalkit::marginal_histogram(real, synthetic, col, bins);
    write_text(out / ("hist_" + col + ".csv"), hist_csv(grid));
    div["marginal"][col] = evalkit::divergence(grid).tv_distance;
  }

  if (cfg.kv.has("pairs")) {
    for (const auto& pair : cfg.kv.get_list("pairs")) {
      auto sep = pair.find(':');
      if (sep == std::string::npos)
        throw ConfigError("pairs entries must be <colA>:<colB>, got '" + pair + "'");
      std::string a = pair.substr(0, sep), b = pair.substr(sep + 1);
      auto grid = evalkit::joint_density(real, synthetic, a, b, bins);
      write_text(out / ("joint_" + a + "__" + b + "_real.csv"), joint_csv(grid, false));
      write_text(out / ("joint_" + a + "__" + b + "_synthetic.csv"), joint_csv(grid, true));
      div["joint"][a + ":" + b] = evalkit::divergence(grid).tv_distance;
    }
  }

  write_text(out / "divergence.json", div.dump(2) + "\n");
  write_manifest(out, "diagnose", cfg);
  std::cout << "diagnostics written to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

mc::Scenario scenario_from(const CommandConfig& cfg, const std::string& condition) {
  mc::Scenario sc;
  std::string kind = cfg.kv.get_or("kind", "binary");
  sc.kind = kind == "ordered" ? mc::Scenario::Kind::ordered : mc::Scenario::Kind::binary;
  sc.name = condition;

  auto beta = cfg.kv.has("beta") ? cfg.kv.get_real_list("beta")
                                 : std::vector<double>{2.0, 2.0, 2.0};
  if (beta.size() != 3) throw ConfigError("mc-run: beta needs exactly 3 entries");

  if (sc.kind == mc::Scenario::Kind::binary) {
    sc.binary_dgp.n = cfg.kv.get_long_or("n", 4000);
    sc.binary_dgp.beta = Eigen::Vector3d(beta[0], beta[1], beta[2]);
    sc.binary_dgp.target_prevalence = cfg.kv.get_real_or("prevalence", 0.5);
    if (cfg.kv.has("pool_ratio")) sc.pool_ratio = cfg.kv.get_real("pool_ratio");
    sc.imbalance_class = static_cast<int>(cfg.kv.get_long_or("imbalance_class", 1));
  } else {
    sc.ordered_dgp.n = cfg.kv.get_long_or("n", 6000);
    sc.ordered_dgp.beta = Eigen::Vector3d(beta[0], beta[1], beta[2]);
    if (cfg.kv.has("proportions"))
      sc.ordered_dgp.target_proportions = cfg.kv.get_real_list("proportions");
    else
      sc.ordered_dgp.target_proportions = std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3};
    if (cfg.kv.has("pool_keep")) sc.pool_keep = cfg.kv.get_real_list("pool_keep");
  }
  sc.minority_scale = cfg.kv.get_real_or("minority_scale", 2.0);

  // Condition grammar: none | imbalanced | ru:<k> | ctgan_ru:<k>
  std::string name = condition;
  auto colon = name.find(':');
  double ratio = 1.0;
  if (colon != std::string::npos) {
    ratio = std::stod(name.substr(colon + 1));
    name = name.substr(0, colon);
  }
  sc.treatment = mc::treatment_from_name(name);
  sc.final_ratio = ratio;
  return sc;
}

int cmd_mc_run(const CommandConfig& cfg) {
  auto seed = cfg.seed();
  auto out = cfg.out_dir();
  int replications = static_cast<int>(cfg.kv.get_long_or("replications", 100));
  int threads = static_cast<int>(cfg.kv.get_long_or("threads", 0));
  auto conditions = cfg.kv.get_list("conditions");

  json manifest_extra;
  std::ostringstream amse_csv, box_csv;
  amse_csv << "condition,amse,replications,failed\n";
  box_csv << "condition,parameter,mean,q1,median,q3,whisker_lo,whisker_hi\n";

  for (const auto& condition : conditions) {
    mc::Scenario sc = scenario_from(cfg, condition);
    sc.ctgan_config = ctgan_config_from(cfg, 0);  // per-replication seeds set inside
    auto summary = mc::run_replications(sc, replications, Rng::substream_seed(seed, "mc"),
                                        threads);

    std::ostringstream reps;
    reps << "replication";
    for (const auto& n : summary.parameter_names) reps << ',' << n;
    reps << ",mse\n";
    for (Eigen::Index r = 0; r < summary.estimates.rows(); ++r) {
      reps << summary.replication_ids[static_cast<std::size_t>(r)];
      for (Eigen::Index p = 0; p < summary.estimates.cols(); ++p)
        reps << ',' << fmt9(summary.estimates(r, p));
      reps << ',' << fmt9(summary.rep_mse[static_cast<std::size_t>(r)]) << '\n';
    }
    write_text(out / ("replications_" + condition + ".csv"), reps.str());

    for (std::size_t p = 0; p < summary.parameter_names.size(); ++p) {
      const auto& b = summary.box[p];
      box_csv << condition << ',' << summary.parameter_names[p] << ',' << fmt9(b.mean) << ','
              << fmt9(b.q1) << ',' << fmt9(b.median) << ',' << fmt9(b.q3) << ','
              << fmt9(b.whisker_lo) << ',' << fmt9(b.whisker_hi) << '\n';
    }
    amse_csv << condition << ',' << fmt9(summary.amse) << ',' << summary.requested << ','
             << summary.failed << '\n';

    if (sc.kind == mc::Scenario::Kind::binary)
      manifest_extra["calibrated_intercept"][condition] = summary.calibrated_intercept;
    else
      manifest_extra["calibrated_thresholds"][condition] = summary.calibrated_thresholds;
    std::cout << "condition " << condition << ": amse " << fmt9(summary.amse) << " ("
              << summary.failed << " failed)\n";
  }

  write_text(out / "amse.csv", amse_csv.str());
  write_text(out / "boxstats.csv", box_csv.str());
  json m;
  m["command"] = "mc-run";
  m["version"] = kVersion;
  m["config"] = cfg.kv.canonical();
  m["config_digest"] = hex64(cfg.kv.digest());
  m["seed"] = cfg.kv.get_long("seed");
  m["calibration"] = manifest_extra;
  write_text(out / "manifest.json", m.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_seeds_sweep(const CommandConfig& cfg) {
  (void)cfg.seed();
  auto out = cfg.out_dir();
  DataSchema schema = load_schema(cfg.require_path("schema"));
  if (schema.label_kind != LabelKind::binary)
    throw ConfigError("seeds-sweep: binary label required");
  Dataset data = load_csv(cfg.require_path("data"), schema);
  double fraction = cfg.kv.get_real_or("train_fraction", 0.7);
  double threshold = cfg.kv.get_real_or("threshold", 0.5);
  int positive = 1;
  if (cfg.kv.has("positive")) {
    positive = schema.category_index(schema.label_index(), cfg.kv.require("positive"));
    if (positive < 0) throw ConfigError("seeds-sweep: unknown positive category");
  }

  auto seed_list = cfg.kv.get_list("seeds");
  std::ostringstream csv;
  csv << "seed,sensitivity,specificity,g_mean\n";
  std::vector<double> sens, spec, gmean;

  for (const auto& seed_str : seed_list) {
    auto sweep_seed = static_cast<std::uint64_t>(std::stoll(seed_str));
    auto parts = split(data, fraction, Rng::substream_seed(sweep_seed, "split"));

    resampling::ResamplePlan plan;
    plan.method = resampling::method_from_name(cfg.kv.require("method"));
    plan.seed = Rng::substream_seed(sweep_seed, "resample");
    plan.targets = parse_targets(cfg, schema, "target");
    plan.ru_targets = parse_targets(cfg, schema, "ru_target");
    plan.k_neighbors = static_cast<int>(cfg.kv.get_long_or("k_neighbors", 5));
    if (cfg.kv.has("minority")) {
      int idx = schema.category_index(schema.label_index(), cfg.kv.require("minority"));
      plan.minority_class = idx;
    }
    plan.ctgan_config = ctgan_config_from(cfg, Rng::substream_seed(sweep_seed, "train"));

    Dataset balanced = resampling::apply(parts.train, plan);
    auto fit = glm::fit_binary_logit(glm::make_design(balanced, true));

    auto eval_design = glm::make_design(parts.test, true);
    std::vector<int> y_true, y_pred;
    for (Eigen::Index i = 0; i < eval_design.features.rows(); ++i) {
      y_true.push_back(eval_design.response[i]);
      double p = sigmoid(eval_design.features.row(i).dot(fit.coefficients));
      y_pred.push_back(p >= threshold ? positive : 1 - positive);
    }
    auto rep = evalkit::score(y_true, y_pred, 2, positive);
    csv << seed_str << ',' << fmt9(rep.sensitivity) << ',' << fmt9(rep.specificity) << ','
        << fmt9(rep.g_mean) << '\n';
    sens.push_back(rep.sensitivity);
    spec.push_back(rep.specificity);
    gmean.push_back(rep.g_mean);
    std::cout << "seed " << seed_str << ": g-mean " << fmt9(rep.g_mean) << "\n";
  }

  auto sd = [](const std::vector<double>& xs) { return std::sqrt(variance_of(xs)); };
  csv << "mean," << fmt9(mean_of(sens)) << ',' << fmt9(mean_of(spec)) << ','
      << fmt9(mean_of(gmean)) << '\n';
  csv << "std," << fmt9(sd(sens)) << ',' << fmt9(sd(spec)) << ',' << fmt9(sd(gmean)) << '\n';
  write_text(out / "sweep.csv", csv.str());
  write_manifest(out, "seeds-sweep", cfg);
  std::cout << "g-mean " << fmt9(mean_of(gmean)) << " +/- " << fmt9(sd(gmean)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* sub, std::string& config_path, std::vector<std::string>& overrides) {
  sub->add_option("--config", config_path, "key = value configuration file");
  sub->add_option("--set", overrides, "override a config key (key=value, repeatable)");
}

// Maps a dedicated flag onto a config key when given.
void add_key_flag(CLI::App* sub, std::vector<std::string>& overrides, const std::string& flag,
                  const std::string& key, const std::string& help) {
  auto holder = std::make_shared<std::string>();
  sub->add_option_function<std::string>(
         flag, [&overrides, key](const std::string& v) { overrides.push_back(key + "=" + v); },
         help)
      ->type_name("TEXT");
  (void)holder;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"rebal: tabular rebalancing, severity models, and validation"};
  app.require_subcommand(1);

  struct SubSpec {
    std::string name;
    std::string help;
    int (*fn)(const CommandConfig&);
  };
  const std::vector<SubSpec> subs = {
      {"resample", "rebalance a dataset and write CSV + provenance", cmd_resample},
      {"fit", "fit a binary or ordered logit and print the report", cmd_fit},
      {"evaluate", "score a predictions file", cmd_evaluate},
      {"diagnose", "real-vs-synthetic histograms, heatmaps, divergences", cmd_diagnose},
      {"mc-run", "Monte Carlo parameter-recovery scenarios", cmd_mc_run},
      {"seeds-sweep", "re-run a pipeline over a seed list", cmd_seeds_sweep},
  };

  struct SubState {
    CLI::App* app = nullptr;
    std::string config_path;
    std::vector<std::string> overrides;
    int (*fn)(const CommandConfig&) = nullptr;
  };
  std::vector<SubState> states(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto* sub = app.add_subcommand(subs[i].name, subs[i].help);
    states[i].app = sub;
    states[i].fn = subs[i].fn;
    add_common(sub, states[i].config_path, states[i].overrides);
    add_key_flag(sub, states[i].overrides, "--data", "data", "input dataset CSV");
    add_key_flag(sub, states[i].overrides, "--schema", "schema", "schema file");
    add_key_flag(sub, states[i].overrides, "--seed", "seed", "global seed");
    add_key_flag(sub, states[i].overrides, "--out", "out", "output directory");
    add_key_flag(sub, states[i].overrides, "--method", "method", "resampling method");
    add_key_flag(sub, states[i].overrides, "--seeds", "seeds", "comma-separated seed list");
    add_key_flag(sub, states[i].overrides, "--predictions", "predictions", "predictions CSV");
    add_key_flag(sub, states[i].overrides, "--real", "real", "real dataset CSV");
    add_key_flag(sub, states[i].overrides, "--synthetic", "synthetic", "synthetic dataset CSV");
  }

  std::vector<const char*> argv;
  argv.push_back("rebal");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& st : states) {
      if (st.app->parsed()) {
        auto cfg = CommandConfig::assemble(st.config_path, st.overrides);
        return st.fn(cfg);
      }
    }
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical-error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rebal::cli
