// Minimal feed-forward engine: dense, batch norm, dropout, activations
// (ReLU, leaky ReLU, tanh, sigmoid, softmax, Gumbel-softmax), reverse-mode
// gradients, and Adam. Batches are (rows x features) matrices.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rebal/rng.hpp"

namespace rebal::neural {

enum class LayerKind { dense, batch_norm, dropout, activation };
enum class Activation { relu, leaky_relu, tanh, sigmoid, softmax, gumbel_softmax };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::relu;
  double leaky_ratio = 0.2;
  double dropout_rate = 0.5;
  double temperature = 0.2;

  static LayerSpec dense(int in, int out);
  static LayerSpec batch_norm(int width);
  static LayerSpec dropout(int width, double rate);
  static LayerSpec act(int width, Activation a, double leaky = 0.2, double temperature = 0.2);
};

// Trainable parameters (and batch-norm running statistics) of one layer.
// Unused members stay empty. The same struct carries gradients.
struct LayerParams {
  Eigen::MatrixXd weight;  // dense: in x out
  Eigen::VectorXd bias;
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct Network {
  std::vector<LayerSpec> spec;
  std::vector<LayerParams> params;

  int input_width() const { return spec.empty() ? 0 : spec.front().in_dim; }
  int output_width() const { return spec.empty() ? 0 : spec.back().out_dim; }
};

// Validates the dimension chain and initializes parameters
// (dense weights uniform in +/- sqrt(6/(fan_in+fan_out))).
Network build_network(std::vector<LayerSpec> spec, Rng& rng);

enum class Mode { train, eval };

struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd output;
  Eigen::MatrixXd mask;      // dropout
  Eigen::RowVectorXd mean;   // batch norm
  Eigen::RowVectorXd inv_std;
  Eigen::MatrixXd xhat;
};

struct Forward {
  Eigen::MatrixXd output;
  std::vector<LayerCache> layers;
  Mode mode = Mode::eval;
};

// Train mode applies dropout masks, batch statistics (updating the running
// estimates), and fresh Gumbel noise; it needs an rng. Eval mode is
// deterministic: running statistics, no dropout, noiseless Gumbel-softmax.
Forward forward(Network& net, const Eigen::MatrixXd& input, Mode mode, Rng* rng);

// Eval-mode forward on an immutable network; safe from multiple threads.
Eigen::MatrixXd infer(const Network& net, const Eigen::MatrixXd& input);

struct Gradients {
  std::vector<LayerParams> layers;
  Eigen::MatrixXd input;
};

Gradients backward(const Network& net, const Forward& cache,
                   const Eigen::MatrixXd& output_grad);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<LayerParams> first_moment;
  std::vector<LayerParams> second_moment;
};

AdamState make_adam(const Network& net, double learning_rate);

// Standard Adam update with bias correction; throws NumericalError naming the
// layer on a non-finite gradient.
void adam_step(Network& net, const Gradients& grads, AdamState& state);

// softmax((logits + Gumbel noise) / temperature); entries positive, sum 1.
Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double temperature, Rng& rng);

}  // namespace rebal::neural
