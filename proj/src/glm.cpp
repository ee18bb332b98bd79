#include "rebal/glm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rebal::glm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

constexpr double kScoreTol = 1e-8;
constexpr double kStepTol = 1e-10;
constexpr double kSeparationBound = 25.0;
constexpr int kBinaryMaxIter = 100;
constexpr int kOrderedMaxIter = 200;

double logistic_cdf(double x) { return sigmoid(x); }
double logistic_pdf(double x) {
  double p = sigmoid(x);
  return p * (1.0 - p);
}

void check_separation(const VectorXd& beta, const std::vector<std::string>& names,
                      std::size_t n_slopes) {
  for (std::size_t j = 0; j < n_slopes; ++j) {
    if (std::abs(beta[static_cast<Eigen::Index>(j)]) > kSeparationBound)
      throw NumericalError("fit: (quasi-)complete separation suspected: |" + names[j] +
                           "| exceeded " + std::to_string(kSeparationBound));
  }
}

// Names the first column that a pivoted QR finds linearly dependent.
std::string dependent_column(const MatrixXd& x, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  auto rank = qr.rank();
  if (rank >= x.cols()) return names.empty() ? "?" : names.back();
  auto perm = qr.colsPermutation().indices();
  return names.at(static_cast<std::size_t>(perm[rank]));
}

}  // namespace

void DesignMatrix::validate() const {
  if (features.rows() != response.size()) throw DataError("design: row/response mismatch");
  if (static_cast<std::size_t>(features.cols()) != names.size())
    throw DataError("design: name/column mismatch");
  if (!features.allFinite()) throw DataError("design: non-finite feature value");
  if (features.rows() < features.cols() + 1)
    throw DataError("design: need more rows than features");
}

DesignMatrix make_design(const Dataset& data, bool intercept) {
  const auto& schema = data.schema();
  auto label = static_cast<std::size_t>(schema.label_index());

  DesignMatrix d;
  d.has_intercept = intercept;
  if (intercept) d.names.emplace_back("(intercept)");
  std::vector<std::pair<std::size_t, int>> slots;  // column, category (-1 = continuous)
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c == label) continue;
    const auto& col = schema.columns[c];
    if (col.kind == ColumnKind::continuous) {
      slots.emplace_back(c, -1);
      d.names.push_back(col.name);
    } else {
      for (std::size_t k = 1; k < col.categories.size(); ++k) {
        slots.emplace_back(c, static_cast<int>(k));
        d.names.push_back(col.name + "=" + col.categories[k]);
      }
    }
  }

  auto n = static_cast<Eigen::Index>(data.n_rows());
  d.features.resize(n, static_cast<Eigen::Index>(d.names.size()));
  d.response.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index j = 0;
    if (intercept) d.features(r, j++) = 1.0;
    for (const auto& [c, cat] : slots) {
      double v = data.at(static_cast<std::size_t>(r), c);
      d.features(r, j++) = cat < 0 ? v : (static_cast<int>(v) == cat ? 1.0 : 0.0);
    }
    d.response[r] = static_cast<int>(data.at(static_cast<std::size_t>(r), label));
  }
  d.validate();
  return d;
}

LogitFit fit_binary_logit(const DesignMatrix& design) {
  design.validate();
  const auto& x = design.features;
  auto n = x.rows();
  auto p = x.cols();

  long n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (design.response[i] != 0 && design.response[i] != 1)
      throw DataError("binary fit: response must be 0/1");
    n1 += design.response[i];
  }
  if (n1 == 0 || n1 == n) throw DataError("binary fit: both classes must be present");

  VectorXd y = design.response.cast<double>();
  VectorXd beta = VectorXd::Zero(p);

  auto loglik = [&](const VectorXd& b) {
    VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += y[i] * eta[i] - softplus(eta[i]);
    return ll;
  };

  LogitFit fit;
  fit.names = design.names;
  double ll = loglik(beta);
  bool converged = false;
  int iter = 0;
  MatrixXd info(p, p);

  while (iter < kBinaryMaxIter) {
    ++iter;
    VectorXd eta = x * beta;
    VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    VectorXd score = x.transpose() * (y - prob);
    VectorXd w = prob.array() * (1.0 - prob.array());
    info.noalias() = x.transpose() * w.asDiagonal() * x;

    if (score.lpNorm<Eigen::Infinity>() < kScoreTol) {
      converged = true;
      break;
    }

    Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() < 1e-12 * ldlt.vectorD().maxCoeff())
      throw NumericalError("binary fit: singular information matrix (column '" +
                           dependent_column(w.cwiseSqrt().asDiagonal() * x, design.names) + "')");

    VectorXd step = ldlt.solve(score);
    // Step halving guards against divergence; the slack scales with |ll| so
    // float noise near the optimum cannot stall the quadratic phase.
    double slack = 1e-9 * (std::abs(ll) + 1.0);
    double scale = 1.0;
    VectorXd candidate = beta + step;
    double ll_new = loglik(candidate);
    int halvings = 0;
    while (ll_new < ll - slack && halvings < 30) {
      scale *= 0.5;
      candidate = beta + scale * step;
      ll_new = loglik(candidate);
      ++halvings;
    }
    double rel_step = (scale * step).norm() / (beta.norm() + 1e-10);
    beta = candidate;
    ll = ll_new;
    check_separation(beta, design.names, static_cast<std::size_t>(p));
    if (rel_step < kStepTol) {
      converged = true;
      break;
    }
  }

  {
    VectorXd eta = x * beta;
    VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    VectorXd w = prob.array() * (1.0 - prob.array());
    info.noalias() = x.transpose() * w.asDiagonal() * x;
    if (converged && (x.transpose() * (y - prob)).lpNorm<Eigen::Infinity>() < kScoreTol)
      converged = true;
  }

  fit.coefficients = beta;
  fit.covariance = info.ldlt().solve(MatrixXd::Identity(p, p));
  fit.log_likelihood = ll;
  double pbar = static_cast<double>(n1) / static_cast<double>(n);
  fit.null_log_likelihood = static_cast<double>(n1) * std::log(pbar) +
                            static_cast<double>(n - n1) * std::log(1.0 - pbar);
  fit.converged = converged;
  fit.iterations = iter;
  if (!converged) throw NumericalError("binary fit: no convergence after " +
                                       std::to_string(kBinaryMaxIter) + " iterations");
  return fit;
}

double predict_prob(const LogitFit& fit, const Eigen::VectorXd& x) {
  if (x.size() + 1 != fit.coefficients.size())
    throw DataError("predict_prob: feature width mismatch");
  double eta = fit.coefficients[0] + fit.coefficients.tail(x.size()).dot(x);
  return sigmoid(eta);
}

namespace {

// Ordered-logit log-likelihood with analytic gradient and Hessian in the
// unconstrained parameterization theta = [beta, t], gamma_1 = t_1,
// gamma_m = gamma_{m-1} + exp(t_m).
struct OrderedObjective {
  const MatrixXd& x;
  const VectorXi& y;
  int m_classes;

  int n_slopes() const { return static_cast<int>(x.cols()); }
  int n_thresh() const { return m_classes - 1; }
  int dim() const { return n_slopes() + n_thresh(); }

  VectorXd thresholds(const VectorXd& theta) const {
    VectorXd g(n_thresh());
    g[0] = theta[n_slopes()];
    for (int m = 1; m < n_thresh(); ++m)
      g[m] = g[m - 1] + std::exp(theta[n_slopes() + m]);
    return g;
  }

  // Returns log-likelihood; fills gradient/Hessian in theta space when asked.
  double eval(const VectorXd& theta, VectorXd* grad, MatrixXd* hess) const {
    int p = n_slopes();
    int q = n_thresh();
    VectorXd gamma = thresholds(theta);
    VectorXd eta = x * theta.head(p);

    double ll = 0.0;
    VectorXd g_beta = VectorXd::Zero(p);
    VectorXd g_gamma = VectorXd::Zero(q);
    MatrixXd h_bb = MatrixXd::Zero(p, p);
    MatrixXd h_bg = MatrixXd::Zero(p, q);
    MatrixXd h_gg = MatrixXd::Zero(q, q);

    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      int yi = y[i];
      int up = yi;          // gamma index above, valid when yi < M-1
      int lo = yi - 1;      // gamma index below, valid when yi > 0
      bool has_up = yi < m_classes - 1;
      bool has_lo = yi > 0;

      double a = has_up ? gamma[up] - eta[i] : 0.0;
      double b = has_lo ? gamma[lo] - eta[i] : 0.0;
      double fa = has_up ? logistic_cdf(a) : 1.0;
      double fb = has_lo ? logistic_cdf(b) : 0.0;
      double prob = fa - fb;
      if (prob < 1e-300) prob = 1e-300;
      ll += std::log(prob);
      if (!grad) continue;

      double da = has_up ? logistic_pdf(a) : 0.0;
      double db = has_lo ? logistic_pdf(b) : 0.0;
      double dda = has_up ? da * (1.0 - 2.0 * logistic_cdf(a)) : 0.0;
      double ddb = has_lo ? db * (1.0 - 2.0 * logistic_cdf(b)) : 0.0;

      double la = da / prob;                       // dl/da
      double lb = -db / prob;                      // dl/db
      double laa = dda / prob - (da / prob) * (da / prob);
      double lbb = -ddb / prob - (db / prob) * (db / prob);
      double lab = da * db / (prob * prob);

      double g_eta = -(la + lb);
      double h_eta = laa + 2.0 * lab + lbb;

      g_beta += g_eta * x.row(i).transpose();
      h_bb += h_eta * (x.row(i).transpose() * x.row(i));
      if (has_up) {
        g_gamma[up] += la;
        h_gg(up, up) += laa;
        h_bg.col(up) += -(laa + lab) * x.row(i).transpose();
      }
      if (has_lo) {
        g_gamma[lo] += lb;
        h_gg(lo, lo) += lbb;
        h_bg.col(lo) += -(lab + lbb) * x.row(i).transpose();
      }
      if (has_up && has_lo) {
        h_gg(up, lo) += lab;
        h_gg(lo, up) += lab;
      }
    }
    if (!grad) return ll;

    // Chain rule through gamma(t): J(m, j) = dgamma_m/dt_j.
    MatrixXd jac = MatrixXd::Zero(q, q);
    for (int m = 0; m < q; ++m) {
      jac(m, 0) = 1.0;
      for (int j = 1; j <= m; ++j) jac(m, j) = std::exp(theta[p + j]);
    }

    grad->resize(dim());
    grad->head(p) = g_beta;
    grad->tail(q) = jac.transpose() * g_gamma;

    if (hess) {
      hess->setZero(dim(), dim());
      hess->topLeftCorner(p, p) = h_bb;
      hess->topRightCorner(p, q) = h_bg * jac;
      hess->bottomLeftCorner(q, p) = (h_bg * jac).transpose();
      MatrixXd h_tt = jac.transpose() * h_gg * jac;
      // Curvature of gamma(t) itself: d2 gamma_m / dt_j^2 = exp(t_j), j>=1.
      for (int j = 1; j < q; ++j) {
        double acc = 0.0;
        for (int m = j; m < q; ++m) acc += g_gamma[m];
        h_tt(j, j) += acc * std::exp(theta[p + j]);
      }
      hess->bottomRightCorner(q, q) = h_tt;
    }
    return ll;
  }
};

}  // namespace

OrderedFit fit_ordered_logit(const DesignMatrix& design, int n_classes) {
  design.validate();
  if (design.has_intercept)
    throw ConfigError("ordered fit: design must not carry an intercept column");
  if (n_classes < 3) throw ConfigError("ordered fit: need M >= 3 classes");

  auto n = design.features.rows();
  std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int yi = design.response[i];
    if (yi < 0 || yi >= n_classes) throw DataError("ordered fit: response out of range");
    ++counts[static_cast<std::size_t>(yi)];
  }
  for (int m = 0; m < n_classes; ++m)
    if (counts[static_cast<std::size_t>(m)] == 0)
      throw DataError("ordered fit: class " + std::to_string(m) + " is empty");

  OrderedObjective obj{design.features, design.response, n_classes};
  int p = obj.n_slopes();
  int q = obj.n_thresh();

  // Start at beta = 0 with thresholds from empirical cumulative frequencies.
  VectorXd theta = VectorXd::Zero(obj.dim());
  {
    double cum = 0.0;
    VectorXd gamma(q);
    for (int m = 0; m < q; ++m) {
      cum += static_cast<double>(counts[static_cast<std::size_t>(m)]) / static_cast<double>(n);
      gamma[m] = std::log(cum / (1.0 - cum));
    }
    theta[p] = gamma[0];
    for (int m = 1; m < q; ++m) theta[p + m] = std::log(gamma[m] - gamma[m - 1]);
  }

  VectorXd grad(obj.dim());
  MatrixXd hess(obj.dim(), obj.dim());
  double ll = obj.eval(theta, &grad, &hess);
  bool converged = false;
  int iter = 0;

  while (iter < kOrderedMaxIter) {
    ++iter;
    if (grad.lpNorm<Eigen::Infinity>() < kScoreTol) {
      converged = true;
      break;
    }
    Eigen::LDLT<MatrixXd> ldlt(-hess);
    VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive())
      step = ldlt.solve(grad);
    else
      step = grad;  // gradient ascent fallback when the Hessian is indefinite

    double slack = 1e-9 * (std::abs(ll) + 1.0);
    double scale = 1.0;
    VectorXd candidate = theta + step;
    double ll_new = obj.eval(candidate, nullptr, nullptr);
    int halvings = 0;
    while ((!std::isfinite(ll_new) || ll_new < ll - slack) && halvings < 40) {
      scale *= 0.5;
      candidate = theta + scale * step;
      ll_new = obj.eval(candidate, nullptr, nullptr);
      ++halvings;
    }
    double rel_step = (scale * step).norm() / (theta.norm() + 1e-10);
    theta = candidate;
    ll = obj.eval(theta, &grad, &hess);
    check_separation(theta.head(p), design.names, static_cast<std::size_t>(p));
    if (rel_step < kStepTol) {
      converged = grad.lpNorm<Eigen::Infinity>() < 1e-4;
      break;
    }
  }
  if (!converged)
    throw NumericalError("ordered fit: no convergence after " + std::to_string(iter) +
                         " iterations");

  OrderedFit fit;
  fit.names = design.names;
  fit.coefficients = theta.head(p);
  fit.thresholds = obj.thresholds(theta);
  fit.log_likelihood = ll;
  fit.converged = converged;
  fit.iterations = iter;
  fit.n_classes = n_classes;

  // Covariance in the (beta, gamma) parameterization.
  MatrixXd vtheta = (-hess).ldlt().solve(MatrixXd::Identity(obj.dim(), obj.dim()));
  MatrixXd t = MatrixXd::Identity(obj.dim(), obj.dim());
  for (int m = 0; m < q; ++m) {
    t(p + m, p) = 1.0;
    for (int j = 1; j <= m; ++j) t(p + m, p + j) = std::exp(theta[p + j]);
  }
  fit.covariance = t * vtheta * t.transpose();
  return fit;
}

Eigen::VectorXd predict_class_probs(const OrderedFit& fit, const Eigen::VectorXd& x) {
  if (x.size() != fit.coefficients.size())
    throw DataError("predict_class_probs: feature width mismatch");
  double eta = fit.coefficients.dot(x);
  VectorXd probs(fit.n_classes);
  double prev = 0.0;
  for (int m = 0; m < fit.n_classes; ++m) {
    double cum = m < fit.n_classes - 1 ? logistic_cdf(fit.thresholds[m] - eta) : 1.0;
    probs[m] = cum - prev;
    prev = cum;
  }
  return probs;
}

double wald_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string significance_stars(double p_value) {
  if (p_value < 0.01) return "***";
  if (p_value < 0.05) return "**";
  if (p_value < 0.1) return "*";
  return "";
}

namespace {

ReportRow make_row(const std::string& name, double coef, double var) {
  ReportRow row;
  row.name = name;
  row.coefficient = coef;
  row.std_error = std::sqrt(std::max(var, 0.0));
  row.z = row.std_error > 0.0 ? coef / row.std_error : 0.0;
  row.p_value = row.std_error > 0.0 ? wald_p_value(row.z) : 1.0;
  row.stars = significance_stars(row.p_value);
  return row;
}

}  // namespace

InferenceReport inference_report(const LogitFit& fit) {
  if (!fit.converged) throw NumericalError("inference_report: unconverged fit");
  InferenceReport rep;
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
    rep.rows.push_back(make_row(fit.names[static_cast<std::size_t>(j)], fit.coefficients[j],
                                fit.covariance(j, j)));
  rep.has_pseudo_r2 = true;
  rep.pseudo_r2 = fit.mcfadden_r2();
  rep.log_likelihood = fit.log_likelihood;
  return rep;
}

InferenceReport inference_report(const OrderedFit& fit) {
  if (!fit.converged) throw NumericalError("inference_report: unconverged fit");
  InferenceReport rep;
  auto p = fit.coefficients.size();
  for (Eigen::Index j = 0; j < p; ++j)
    rep.rows.push_back(make_row(fit.names[static_cast<std::size_t>(j)], fit.coefficients[j],
                                fit.covariance(j, j)));
  for (Eigen::Index m = 0; m < fit.thresholds.size(); ++m)
    rep.rows.push_back(make_row("threshold_" + std::to_string(m + 1), fit.thresholds[m],
                                fit.covariance(p + m, p + m)));
  rep.log_likelihood = fit.log_likelihood;
  return rep;
}

std::string InferenceReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %12s %12s %8s %10s %s\n", "Variable", "Coeff.",
                "Std.err.", "z", "p-value", "");
  out << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-28s %12.4f %12.4f %8.3f %10.4g %s\n", row.name.c_str(),
                  row.coefficient, row.std_error, row.z, row.p_value, row.stars.c_str());
    out << buf;
  }
  if (has_pseudo_r2) {
    std::snprintf(buf, sizeof(buf), "%-28s %12.4f  (McFadden)\n", "Pseudo R-squ.", pseudo_r2);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-28s %12.4f\n", "Log-likelihood", log_likelihood);
  out << buf;
  out << "Note: ***p-value < 0.01; ** p-value < 0.05; * p-value < 0.1.\n";
  return out.str();
}

std::string InferenceReport::to_csv() const {
  std::ostringstream out;
  out << "name,coefficient,std_error,z,p_value,stars\n";
  char buf[200];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%s\n", row.name.c_str(),
                  row.coefficient, row.std_error, row.z, row.p_value, row.stars.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace rebal::glm
