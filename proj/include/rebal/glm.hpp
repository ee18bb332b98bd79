// Maximum-likelihood binary and ordered (proportional-odds) logit models with
// standard errors, Wald p-values, significance stars, and McFadden pseudo-R2.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rebal/tabular.hpp"

namespace rebal::glm {

// Binary designs carry a leading intercept column; ordered designs do not
// (the thresholds absorb it).
struct DesignMatrix {
  Eigen::MatrixXd features;
  std::vector<std::string> names;
  Eigen::VectorXi response;  // 0/1 or 0..M-1
  bool has_intercept = false;

  void validate() const;
};

// Dummy coding: continuous columns pass through; each non-label discrete
// column contributes |D|-1 indicators against its first category.
DesignMatrix make_design(const Dataset& data, bool intercept);

struct LogitFit {
  Eigen::VectorXd coefficients;  // [intercept, features...]
  Eigen::MatrixXd covariance;
  std::vector<std::string> names;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;

  double mcfadden_r2() const { return 1.0 - log_likelihood / null_log_likelihood; }
};

struct OrderedFit {
  Eigen::VectorXd coefficients;  // slopes only
  Eigen::VectorXd thresholds;    // strictly increasing, M-1 of them
  Eigen::MatrixXd covariance;    // over [slopes, thresholds]
  std::vector<std::string> names;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  int n_classes = 0;
};

// Newton-Raphson with step halving; converged when max |score| < 1e-8 or the
// relative step is < 1e-10 (100 iteration cap). Quasi-complete separation is
// reported once any coefficient passes 25 in magnitude.
LogitFit fit_binary_logit(const DesignMatrix& design);

double predict_prob(const LogitFit& fit, const Eigen::VectorXd& x);

// Proportional-odds MLE; thresholds kept increasing through a log-increment
// reparameterization. M >= 3 and every class present.
OrderedFit fit_ordered_logit(const DesignMatrix& design, int n_classes);

// P(Y = m | x) for m = 0..M-1.
Eigen::VectorXd predict_class_probs(const OrderedFit& fit, const Eigen::VectorXd& x);

struct ReportRow {
  std::string name;
  double coefficient = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 0.0;
  std::string stars;  // *** < 0.01, ** < 0.05, * < 0.1
};

struct InferenceReport {
  std::vector<ReportRow> rows;
  bool has_pseudo_r2 = false;
  double pseudo_r2 = 0.0;
  double log_likelihood = 0.0;

  std::string to_text() const;
  std::string to_csv() const;
};

InferenceReport inference_report(const LogitFit& fit);
InferenceReport inference_report(const OrderedFit& fit);

std::string significance_stars(double p_value);
double wald_p_value(double z);

}  // namespace rebal::glm
