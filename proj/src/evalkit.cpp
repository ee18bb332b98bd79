#include "rebal/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rebal::evalkit {

namespace {

double safe_ratio(long num, long den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

int continuous_bin(double v, double lo, double width, int bins) {
  auto b = static_cast<int>((v - lo) / width);
  return std::clamp(b, 0, bins - 1);
}

}  // namespace

double g_mean(double sensitivity, double specificity) {
  return std::sqrt(sensitivity * specificity);
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes) {
  if (y_true.size() != y_pred.size()) throw DataError("score: length mismatch");
  if (n_classes < 2) throw ConfigError("score: need >= 2 classes");
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixX<long>::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
      throw DataError("score: label out of range at row " + std::to_string(i + 1));
    ++cm.counts(t, p);
  }
  return cm;
}

MetricsReport score(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                    int n_classes, int positive_class) {
  if (positive_class < 0 || positive_class >= n_classes)
    throw ConfigError("score: bad positive class");
  auto cm = confusion(y_true, y_pred, n_classes);
  MetricsReport rep;
  rep.sensitivity = safe_ratio(cm.tp(positive_class), cm.tp(positive_class) + cm.fn(positive_class),
                               rep.degenerate);
  rep.specificity = safe_ratio(cm.tn(positive_class), cm.tn(positive_class) + cm.fp(positive_class),
                               rep.degenerate);
  rep.g_mean = g_mean(rep.sensitivity, rep.specificity);
  return rep;
}

MulticlassReport score_multiclass(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                  int n_classes) {
  if (n_classes < 3) throw ConfigError("score_multiclass: need M >= 3");
  auto cm = confusion(y_true, y_pred, n_classes);
  MulticlassReport rep;
  double log_sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    MetricsReport r;
    r.sensitivity = safe_ratio(cm.tp(c), cm.tp(c) + cm.fn(c), r.degenerate);
    r.specificity = safe_ratio(cm.tn(c), cm.tn(c) + cm.fp(c), r.degenerate);
    r.g_mean = g_mean(r.sensitivity, r.specificity);
    rep.degenerate = rep.degenerate || r.degenerate;
    log_sum += r.sensitivity > 0.0 ? std::log(r.sensitivity)
                                   : -std::numeric_limits<double>::infinity();
    rep.per_class.push_back(r);
  }
  rep.overall_g_mean = std::isfinite(log_sum)
                           ? std::exp(log_sum / static_cast<double>(n_classes))
                           : 0.0;
  return rep;
}

namespace {

int require_column(const Dataset& real, const Dataset& synthetic, const std::string& column) {
  int c = real.schema().column_index(column);
  if (c < 0) throw ConfigError("histogram: unknown column '" + column + "'");
  int cs = synthetic.schema().column_index(column);
  if (cs != c ||
      real.schema().columns[static_cast<std::size_t>(c)].kind !=
          synthetic.schema().columns[static_cast<std::size_t>(cs)].kind)
    throw ConfigError("histogram: column '" + column + "' differs across schemas");
  return c;
}

struct Axis {
  bool discrete = false;
  int bins = 0;
  double lo = 0.0;
  double width = 1.0;
  std::vector<double> edges;
  std::vector<std::string> labels;

  int bin_of(double v) const {
    return discrete ? static_cast<int>(v) : continuous_bin(v, lo, width, bins);
  }
};

Axis build_axis(const Dataset& real, const Dataset& synthetic, int column, int bins) {
  const auto& col = real.schema().column(column);
  Axis ax;
  if (col.kind == ColumnKind::discrete) {
    ax.discrete = true;
    ax.bins = static_cast<int>(col.categories.size());
    ax.labels = col.categories;
    return ax;
  }
  if (bins < 2) throw ConfigError("histogram: continuous column needs bins >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t r = 0; r < real.n_rows(); ++r) {
    lo = std::min(lo, real.at(r, static_cast<std::size_t>(column)));
    hi = std::max(hi, real.at(r, static_cast<std::size_t>(column)));
  }
  for (std::size_t r = 0; r < synthetic.n_rows(); ++r) {
    lo = std::min(lo, synthetic.at(r, static_cast<std::size_t>(column)));
    hi = std::max(hi, synthetic.at(r, static_cast<std::size_t>(column)));
  }
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  ax.bins = bins;
  ax.lo = lo;
  ax.width = (hi - lo) / bins;
  ax.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    ax.edges[static_cast<std::size_t>(b)] = lo + b * ax.width;
  ax.edges.back() = hi;
  return ax;
}

}  // namespace

HistogramGrid marginal_histogram(const Dataset& real, const Dataset& synthetic,
                                 const std::string& column, int bins) {
  int c = require_column(real, synthetic, column);
  Axis ax = build_axis(real, synthetic, c, bins);

  HistogramGrid grid;
  grid.discrete = ax.discrete;
  grid.edges = ax.edges;
  grid.labels = ax.labels;
  grid.real_counts.assign(static_cast<std::size_t>(ax.bins), 0);
  grid.synthetic_counts.assign(static_cast<std::size_t>(ax.bins), 0);
  for (std::size_t r = 0; r < real.n_rows(); ++r)
    ++grid.real_counts[static_cast<std::size_t>(ax.bin_of(real.at(r, static_cast<std::size_t>(c))))];
  for (std::size_t r = 0; r < synthetic.n_rows(); ++r)
    ++grid.synthetic_counts[static_cast<std::size_t>(
        ax.bin_of(synthetic.at(r, static_cast<std::size_t>(c))))];
  return grid;
}

JointGrid joint_density(const Dataset& real, const Dataset& synthetic, const std::string& col_a,
                        const std::string& col_b, int bins) {
  int ca = require_column(real, synthetic, col_a);
  int cb = require_column(real, synthetic, col_b);
  Axis ax = build_axis(real, synthetic, ca, bins);
  Axis bx = build_axis(real, synthetic, cb, bins);

  JointGrid grid;
  grid.axis_a.discrete = ax.discrete;
  grid.axis_a.edges = ax.edges;
  grid.axis_a.labels = ax.labels;
  grid.axis_b.discrete = bx.discrete;
  grid.axis_b.edges = bx.edges;
  grid.axis_b.labels = bx.labels;
  grid.real = Eigen::MatrixX<long>::Zero(ax.bins, bx.bins);
  grid.synthetic = Eigen::MatrixX<long>::Zero(ax.bins, bx.bins);
  for (std::size_t r = 0; r < real.n_rows(); ++r)
    ++grid.real(ax.bin_of(real.at(r, static_cast<std::size_t>(ca))),
                bx.bin_of(real.at(r, static_cast<std::size_t>(cb))));
  for (std::size_t r = 0; r < synthetic.n_rows(); ++r)
    ++grid.synthetic(ax.bin_of(synthetic.at(r, static_cast<std::size_t>(ca))),
                     bx.bin_of(synthetic.at(r, static_cast<std::size_t>(cb))));
  return grid;
}

namespace {

Divergence divergence_counts(const long* real, const long* synthetic, std::size_t n) {
  long rt = 0, st = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rt += real[i];
    st += synthetic[i];
  }
  if (rt == 0 || st == 0) throw DataError("divergence: empty source");
  Divergence d;
  d.residuals.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pr = static_cast<double>(real[i]) / static_cast<double>(rt);
    double ps = static_cast<double>(synthetic[i]) / static_cast<double>(st);
    d.residuals[i] = pr - ps;
    acc += std::abs(pr - ps);
  }
  d.tv_distance = 0.5 * acc;
  return d;
}

}  // namespace

Divergence divergence(const HistogramGrid& grid) {
  return divergence_counts(grid.real_counts.data(), grid.synthetic_counts.data(),
                           grid.real_counts.size());
}

Divergence divergence(const JointGrid& grid) {
  return divergence_counts(grid.real.data(), grid.synthetic.data(),
                           static_cast<std::size_t>(grid.real.size()));
}

std::vector<double> vif(const glm::DesignMatrix& design) {
  const auto& x = design.features;
  auto first = design.has_intercept ? 1 : 0;
  auto p = x.cols() - first;
  if (p < 2) throw ConfigError("vif: need >= 2 features");

  auto n = x.rows();
  std::vector<double> out;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd target = x.col(first + j);
    double tmean = target.mean();
    double sst = (target.array() - tmean).square().sum();
    if (sst <= 0.0)
      throw ConfigError("vif: constant column '" + design.names[static_cast<std::size_t>(first + j)] +
                        "'");

    Eigen::MatrixXd others(n, p);  // intercept + remaining features
    others.col(0).setOnes();
    Eigen::Index k = 1;
    for (Eigen::Index m = 0; m < p; ++m)
      if (m != j) others.col(k++) = x.col(first + m);

    Eigen::VectorXd coef = others.colPivHouseholderQr().solve(target);
    double ssr = (target - others * coef).squaredNorm();
    double r2 = 1.0 - ssr / sst;
    if (r2 >= 1.0 - 1e-12)
      out.push_back(std::numeric_limits<double>::infinity());
    else
      out.push_back(1.0 / (1.0 - r2));
  }
  return out;
}

}  // namespace rebal::evalkit
