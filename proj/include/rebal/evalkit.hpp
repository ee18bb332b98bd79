// Classification metrics, confusion matrices, real-vs-synthetic distribution
// diagnostics, and VIF screening.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rebal/glm.hpp"
#include "rebal/tabular.hpp"

namespace rebal::evalkit {

struct ConfusionMatrix {
  // counts(t, p): rows true class, columns predicted class.
  Eigen::MatrixX<long> counts;

  long total() const { return counts.sum(); }
  // Binary view against a positive class.
  long tp(int positive) const { return counts(positive, positive); }
  long fn(int positive) const { return counts.row(positive).sum() - tp(positive); }
  long fp(int positive) const { return counts.col(positive).sum() - tp(positive); }
  long tn(int positive) const { return total() - tp(positive) - fn(positive) - fp(positive); }
};

struct MetricsReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double g_mean = 0.0;
  bool degenerate = false;  // a zero denominator forced a metric to 0
};

struct MulticlassReport {
  std::vector<MetricsReport> per_class;  // one-vs-rest
  double overall_g_mean = 0.0;           // geometric mean of class sensitivities
  bool degenerate = false;
};

double g_mean(double sensitivity, double specificity);

// Exact counting over integer class labels.
ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes);
MetricsReport score(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                    int n_classes, int positive_class);
MulticlassReport score_multiclass(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                  int n_classes);

// Shared-edge histograms of a column in two datasets with identical schemas.
struct HistogramGrid {
  bool discrete = false;
  std::vector<double> edges;        // continuous: bins+1 strictly increasing
  std::vector<std::string> labels;  // discrete: category names
  std::vector<long> real_counts;
  std::vector<long> synthetic_counts;
};

struct JointGrid {
  HistogramGrid axis_a;  // counts unused; carries edges/labels of each axis
  HistogramGrid axis_b;
  Eigen::MatrixX<long> real;
  Eigen::MatrixX<long> synthetic;
};

inline constexpr int kDefaultBins = 30;

HistogramGrid marginal_histogram(const Dataset& real, const Dataset& synthetic,
                                 const std::string& column, int bins);
JointGrid joint_density(const Dataset& real, const Dataset& synthetic, const std::string& col_a,
                        const std::string& col_b, int bins);

struct Divergence {
  double tv_distance = 0.0;              // half L1 between normalized histograms
  std::vector<double> residuals;         // per-bin real minus synthetic share
};

Divergence divergence(const HistogramGrid& grid);
Divergence divergence(const JointGrid& grid);

// VIF_j = 1 / (1 - R2_j) from regressing feature j on the remaining features
// (plus an intercept). Collinear features report +infinity.
std::vector<double> vif(const glm::DesignMatrix& design);

}  // namespace rebal::evalkit
