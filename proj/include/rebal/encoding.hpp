// Row <-> model-space encoding.
//
// Encoded layout: [alpha_1, mode_1 one-hot, ..., alpha_Nc, mode_Nc one-hot,
// d_1 one-hot, ..., d_Nd one-hot]. Continuous blocks in schema order first,
// then discrete blocks in schema order.
#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "rebal/mode_norm.hpp"
#include "rebal/tabular.hpp"

namespace rebal {

struct EncodedLayout {
  struct ContinuousBlock {
    int column = 0;        // schema column index
    int alpha_offset = 0;  // scalar position
    int mode_offset = 0;   // one-hot start
    int modes = 0;
  };
  struct DiscreteBlock {
    int column = 0;
    int offset = 0;
    int size = 0;
  };
  std::vector<ContinuousBlock> continuous;
  std::vector<DiscreteBlock> discrete;
  int width = 0;
};

class RowEncoder {
 public:
  RowEncoder(DataSchema schema, std::vector<modenorm::ModeModel> mode_models);

  const EncodedLayout& layout() const { return layout_; }
  const DataSchema& schema() const { return schema_; }
  const std::vector<modenorm::ModeModel>& mode_models() const { return mode_models_; }

  // Mode indicators are sampled from posterior responsibilities via rng.
  Eigen::VectorXd encode(std::span<const double> row, Rng& rng) const;

  // Inverse: argmax over each one-hot segment; continuous via denormalize.
  std::vector<double> decode(const Eigen::VectorXd& encoded) const;

  Eigen::MatrixXd encode_dataset(const Dataset& data, Rng& rng) const;
  Dataset decode_rows(const Eigen::MatrixXd& encoded) const;

 private:
  DataSchema schema_;
  std::vector<modenorm::ModeModel> mode_models_;  // one per continuous column, schema order
  EncodedLayout layout_;
};

// Fits one mode model per continuous column (schema order); constant columns
// come back flagged degenerate.
std::vector<modenorm::ModeModel> fit_mode_models(const Dataset& data, int max_modes,
                                                 double weight_threshold, std::uint64_t seed);

}  // namespace rebal
