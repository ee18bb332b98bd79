// Conditional tabular GAN: conditional vectors, training-by-sampling,
// adversarial training with a conditional cross-entropy penalty, pac-grouped
// discriminator, and conditional/unconditional sampling.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rebal/encoding.hpp"
#include "rebal/neural.hpp"
#include "rebal/tabular.hpp"

namespace rebal::ctgan {

struct CtganConfig {
  int epochs = 200;
  double lr_generator = 1e-4;
  double lr_discriminator = 5e-4;
  int batch_size = 500;
  int pac = 10;
  int z_dim = 128;
  double gumbel_temperature = 0.2;
  double leaky_ratio = 0.2;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// One-hot over the concatenated category blocks of all discrete columns.
struct CondLayout {
  std::vector<int> column;  // schema column index per block, schema order
  std::vector<int> offset;
  std::vector<int> size;
  int width = 0;

  static CondLayout build(const DataSchema& schema);
  int block_of_column(int schema_column) const;  // -1 when not discrete
};

struct CondVector {
  Eigen::VectorXd values;
  int column = 0;  // schema column index
  int category = 0;
};

CondVector build_cond_vector(const DataSchema& schema, int column, int category);
CondVector build_cond_vector(const DataSchema& schema, const std::string& column, int category);

// Training-by-sampling draw: column uniform among discrete columns, category
// with probability log(1 + count) / sum log(1 + count).
std::pair<int, int> sample_training_condition(const Dataset& data, const DataSchema& schema,
                                              Rng& rng);

struct Condition {
  std::string column;
  std::string category;
};

struct TrainingHistory {
  std::vector<double> generator_loss;     // per epoch
  std::vector<double> discriminator_loss;
};

struct CtganModel {
  DataSchema schema;
  std::vector<modenorm::ModeModel> mode_models;
  CtganConfig config;
  CondLayout cond;
  int encoded_width = 0;

  // Generator body (concatenating skip blocks), then 128-wide feature tail
  // feeding per-block output heads.
  neural::Network g_block1;  // dense + BN + ReLU
  neural::Network g_block2;  // dense + BN + ReLU
  neural::Network g_block3;  // dense + BN + leaky
  neural::Network g_block4;  // dense + leaky
  std::vector<neural::Network> alpha_heads;  // dense + tanh, per continuous column
  std::vector<neural::Network> mode_heads;   // dense + Gumbel-softmax
  std::vector<neural::Network> cat_heads;    // dense + Gumbel-softmax, per discrete column

  // Final dense layer emits a logit; scores pass through a sigmoid.
  neural::Network discriminator;

  // Category frequencies of the training data, per discrete block; drives
  // unconditional sampling.
  std::vector<std::vector<long>> category_counts;

  TrainingHistory history;

  RowEncoder make_encoder() const { return RowEncoder(schema, mode_models); }
};

// Alternating adversarial training; deterministic given config.seed.
CtganModel train(const Dataset& data, const CtganConfig& config);

// Decoded rows conforming to the schema. With a condition the cond vector is
// fixed; otherwise it is drawn against the training category frequencies.
Dataset generate(const CtganModel& model, long n, const std::optional<Condition>& condition,
                 std::uint64_t seed);

// Raw generator outputs before decoding (mode and category blocks on the
// probability simplex, alphas inside the tanh range).
Eigen::MatrixXd generate_raw(const CtganModel& model, long n,
                             const std::optional<Condition>& condition, std::uint64_t seed);

// Discriminator scores in (0,1) for a batch of encoded rows + cond vectors
// (row count must be a multiple of pac).
Eigen::VectorXd discriminator_scores(const CtganModel& model, const Eigen::MatrixXd& encoded_rows,
                                     const Eigen::MatrixXd& cond_rows);

// Versioned little-endian model bundle; loadable without retraining.
void save_bundle(const CtganModel& model, const std::string& path);
CtganModel load_bundle(const std::string& path);

}  // namespace rebal::ctgan
