// Shared test helpers: finite-difference gradient oracle and small fixtures.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "rebal/neural.hpp"
#include "rebal/tabular.hpp"

namespace rebal::testutil {

// Toy distribution: one bimodal continuous column, one 70/30 discrete
// column, and a 50/50 binary label, mutually independent.
inline DataSchema toy_schema() {
  DataSchema schema;
  schema.columns = {{"value", ColumnKind::continuous, {}},
                    {"group", ColumnKind::discrete, {"common", "rare"}},
                    {"label", ColumnKind::discrete, {"neg", "pos"}}};
  schema.label_column = "label";
  schema.label_kind = LabelKind::binary;
  return schema;
}

inline Dataset toy_dataset(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data(toy_schema());
  data.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double value = rng.bernoulli(0.5) ? rng.normal(-4.0, 0.8) : rng.normal(4.0, 0.8);
    double group = rng.bernoulli(0.3) ? 1.0 : 0.0;
    double label = rng.bernoulli(0.5) ? 1.0 : 0.0;
    data.append_row(std::vector<double>{value, group, label});
  }
  return data;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // location of the worst mismatch
};

// Central finite differences against backward() for a scalar loss
// L = sum(W .* output), with the rng reset per evaluation so dropout masks
// and Gumbel noise stay fixed.
inline GradCheckResult gradient_check(neural::Network& net, const Eigen::MatrixXd& input,
                                      neural::Mode mode, std::uint64_t noise_seed,
                                      double h = 1e-5) {
  Rng weight_rng(noise_seed ^ 0x5eedbeef);
  Eigen::MatrixXd loss_weights(input.rows(), net.output_width());
  for (Eigen::Index r = 0; r < loss_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < loss_weights.cols(); ++c)
      loss_weights(r, c) = weight_rng.uniform(-1.0, 1.0);

  auto loss_of = [&](const Eigen::MatrixXd& x) {
    Rng rng(noise_seed);
    auto fw = neural::forward(net, x, mode, &rng);
    return (fw.output.cwiseProduct(loss_weights)).sum();
  };

  Rng rng(noise_seed);
  auto fw = neural::forward(net, input, mode, &rng);
  auto grads = neural::backward(net, fw, loss_weights);

  GradCheckResult result;
  auto record = [&](double analytic, double fd, const std::string& where) {
    double rel = std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = where;
    }
  };

  // Parameter gradients (subsampled on big weight matrices).
  for (std::size_t l = 0; l < net.params.size(); ++l) {
    auto& p = net.params[l];
    auto& g = grads.layers[l];
    auto check_entry = [&](double& slot, double analytic, const std::string& where) {
      double saved = slot;
      slot = saved + h;
      double up = loss_of(input);
      slot = saved - h;
      double down = loss_of(input);
      slot = saved;
      record(analytic, (up - down) / (2.0 * h), where);
    };
    if (p.weight.size()) {
      Rng pick(noise_seed ^ l);
      auto samples = std::min<Eigen::Index>(p.weight.size(), 12);
      for (Eigen::Index s = 0; s < samples; ++s) {
        auto idx = static_cast<Eigen::Index>(pick.uniform_int(
            static_cast<std::uint64_t>(p.weight.size())));
        check_entry(p.weight.data()[idx], g.weight.data()[idx],
                    "layer " + std::to_string(l) + " weight");
      }
      for (Eigen::Index s = 0; s < std::min<Eigen::Index>(p.bias.size(), 6); ++s)
        check_entry(p.bias[s], g.bias[s], "layer " + std::to_string(l) + " bias");
    }
    if (p.scale.size()) {
      for (Eigen::Index s = 0; s < std::min<Eigen::Index>(p.scale.size(), 6); ++s) {
        check_entry(p.scale[s], g.scale[s], "layer " + std::to_string(l) + " scale");
        check_entry(p.shift[s], g.shift[s], "layer " + std::to_string(l) + " shift");
      }
    }
  }

  // Input gradient.
  Eigen::MatrixXd x = input;
  Rng pick(noise_seed ^ 0xabc);
  auto samples = std::min<Eigen::Index>(x.size(), 12);
  for (Eigen::Index s = 0; s < samples; ++s) {
    auto idx = static_cast<Eigen::Index>(pick.uniform_int(static_cast<std::uint64_t>(x.size())));
    double saved = x.data()[idx];
    x.data()[idx] = saved + h;
    double up = loss_of(x);
    x.data()[idx] = saved - h;
    double down = loss_of(x);
    x.data()[idx] = saved;
    record(grads.input.data()[idx], (up - down) / (2.0 * h), "input");
  }
  return result;
}

}  // namespace rebal::testutil
