#include "rebal/neural.hpp"

#include <cmath>

#include "rebal/common.hpp"

namespace rebal::neural {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

// Row-wise stable softmax of a pre-divided logit matrix.
Eigen::MatrixXd rowwise_softmax(const Eigen::MatrixXd& u) {
  Eigen::MatrixXd out(u.rows(), u.cols());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    double mx = u.row(r).maxCoeff();
    Eigen::RowVectorXd e = (u.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  return s;
}

LayerSpec LayerSpec::batch_norm(int width) {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.in_dim = s.out_dim = width;
  return s;
}

LayerSpec LayerSpec::dropout(int width, double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.in_dim = s.out_dim = width;
  s.dropout_rate = rate;
  return s;
}

LayerSpec LayerSpec::act(int width, Activation a, double leaky, double temperature) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.in_dim = s.out_dim = width;
  s.activation = a;
  s.leaky_ratio = leaky;
  s.temperature = temperature;
  return s;
}

Network build_network(std::vector<LayerSpec> spec, Rng& rng) {
  Network net;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& s = spec[i];
    if (s.in_dim <= 0 || s.out_dim <= 0)
      throw ConfigError("layer " + std::to_string(i) + ": non-positive dimension");
    if (i > 0 && spec[i - 1].out_dim != s.in_dim)
      throw ConfigError("layer " + std::to_string(i) + ": dimension chain broken (" +
                        std::to_string(spec[i - 1].out_dim) + " -> " +
                        std::to_string(s.in_dim) + ")");
    if (s.kind != LayerKind::dense && s.in_dim != s.out_dim)
      throw ConfigError("layer " + std::to_string(i) + ": width-preserving layer with in != out");
    if (s.kind == LayerKind::dropout && !(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
      throw ConfigError("layer " + std::to_string(i) + ": dropout rate outside [0,1)");
    if (s.kind == LayerKind::activation) {
      if (s.activation == Activation::leaky_relu && !(s.leaky_ratio > 0.0 && s.leaky_ratio < 1.0))
        throw ConfigError("layer " + std::to_string(i) + ": leaky ratio outside (0,1)");
      if (s.activation == Activation::gumbel_softmax && !(s.temperature > 0.0))
        throw ConfigError("layer " + std::to_string(i) + ": non-positive Gumbel temperature");
    }

    LayerParams p;
    if (s.kind == LayerKind::dense) {
      double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
      p.weight.resize(s.in_dim, s.out_dim);
      for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < p.weight.cols(); ++c)
          p.weight(r, c) = rng.uniform(-bound, bound);
      p.bias = Eigen::VectorXd::Zero(s.out_dim);
    } else if (s.kind == LayerKind::batch_norm) {
      p.scale = Eigen::VectorXd::Ones(s.out_dim);
      p.shift = Eigen::VectorXd::Zero(s.out_dim);
      p.running_mean = Eigen::VectorXd::Zero(s.out_dim);
      p.running_var = Eigen::VectorXd::Ones(s.out_dim);
    }
    net.params.push_back(std::move(p));
  }
  net.spec = std::move(spec);
  return net;
}

Forward forward(Network& net, const Eigen::MatrixXd& input, Mode mode, Rng* rng) {
  if (net.spec.empty()) throw ConfigError("forward: empty network");
  if (input.cols() != net.input_width())
    throw DataError("forward: input width " + std::to_string(input.cols()) + " != " +
                    std::to_string(net.input_width()));
  if (mode == Mode::train && rng == nullptr)
    throw ConfigError("forward: train mode needs an rng");

  Forward fw;
  fw.mode = mode;
  fw.layers.resize(net.spec.size());
  Eigen::MatrixXd x = input;
  auto n = static_cast<double>(input.rows());

  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const auto& s = net.spec[i];
    auto& p = net.params[i];
    auto& cache = fw.layers[i];
    cache.input = x;

    switch (s.kind) {
      case LayerKind::dense: {
        Eigen::MatrixXd y(x.rows(), s.out_dim);
        y.noalias() = x * p.weight;
        y.rowwise() += p.bias.transpose();
        x = std::move(y);
        break;
      }
      case LayerKind::batch_norm: {
        if (mode == Mode::train) {
          cache.mean = x.colwise().mean();
          Eigen::MatrixXd centered = x.rowwise() - cache.mean;
          Eigen::RowVectorXd var = centered.array().square().colwise().mean();
          cache.inv_std = (var.array() + kBnEps).sqrt().inverse();
          cache.xhat = centered.array().rowwise() * cache.inv_std.array();
          p.running_mean = kBnMomentum * p.running_mean + (1.0 - kBnMomentum) * cache.mean.transpose();
          p.running_var = kBnMomentum * p.running_var + (1.0 - kBnMomentum) * var.transpose();
        } else {
          cache.mean = p.running_mean.transpose();
          cache.inv_std = (p.running_var.transpose().array() + kBnEps).sqrt().inverse();
          cache.xhat = (x.rowwise() - cache.mean).array().rowwise() * cache.inv_std.array();
        }
        x = (cache.xhat.array().rowwise() * p.scale.transpose().array()).matrix();
        x.rowwise() += p.shift.transpose();
        break;
      }
      case LayerKind::dropout: {
        if (mode == Mode::train && s.dropout_rate > 0.0) {
          double keep = 1.0 - s.dropout_rate;
          cache.mask.resize(x.rows(), x.cols());
          for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c)
              cache.mask(r, c) = rng->uniform01() < keep ? 1.0 / keep : 0.0;
          x = x.cwiseProduct(cache.mask);
        }
        break;
      }
      case LayerKind::activation: {
        switch (s.activation) {
          case Activation::relu:
            x = x.cwiseMax(0.0);
            break;
          case Activation::leaky_relu:
            x = x.unaryExpr([&](double v) { return v > 0.0 ? v : s.leaky_ratio * v; });
            break;
          case Activation::tanh:
            x = x.array().tanh();
            break;
          case Activation::sigmoid:
            x = x.unaryExpr([](double v) { return sigmoid(v); });
            break;
          case Activation::softmax:
            x = rowwise_softmax(x);
            break;
          case Activation::gumbel_softmax: {
            Eigen::MatrixXd u = x;
            if (mode == Mode::train) {
              for (Eigen::Index r = 0; r < u.rows(); ++r)
                for (Eigen::Index c = 0; c < u.cols(); ++c)
                  u(r, c) += rng->gumbel();
            }
            x = rowwise_softmax(u / s.temperature);
            break;
          }
        }
        break;
      }
    }
    cache.output = x;
    (void)n;
  }
  fw.output = x;
  return fw;
}

Eigen::MatrixXd infer(const Network& net, const Eigen::MatrixXd& input) {
  // Eval mode touches no mutable state; the const_cast never writes.
  return forward(const_cast<Network&>(net), input, Mode::eval, nullptr).output;
}

Gradients backward(const Network& net, const Forward& cache, const Eigen::MatrixXd& output_grad) {
  if (cache.layers.size() != net.spec.size())
    throw Error("backward: cache does not match network");
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols())
    throw Error("backward: gradient shape mismatch");

  Gradients grads;
  grads.layers.resize(net.spec.size());
  Eigen::MatrixXd d = output_grad;

  for (std::size_t ri = net.spec.size(); ri-- > 0;) {
    const auto& s = net.spec[ri];
    const auto& p = net.params[ri];
    const auto& c = cache.layers[ri];
    auto& g = grads.layers[ri];

    switch (s.kind) {
      case LayerKind::dense: {
        g.weight.resize(p.weight.rows(), p.weight.cols());
        g.weight.noalias() = c.input.transpose() * d;
        g.bias = d.colwise().sum().transpose();
        Eigen::MatrixXd dx(d.rows(), p.weight.rows());
        dx.noalias() = d * p.weight.transpose();
        d = std::move(dx);
        break;
      }
      case LayerKind::batch_norm: {
        g.scale = (d.cwiseProduct(c.xhat)).colwise().sum().transpose();
        g.shift = d.colwise().sum().transpose();
        if (cache.mode == Mode::train) {
          auto n = static_cast<double>(d.rows());
          Eigen::MatrixXd dxhat = d.array().rowwise() * p.scale.transpose().array();
          Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
          Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.cwiseProduct(c.xhat)).colwise().sum();
          Eigen::MatrixXd dx = n * dxhat;
          dx.rowwise() -= sum_dxhat;
          dx -= (c.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
          dx.array().rowwise() *= (c.inv_std / n).array();
          d = std::move(dx);
        } else {
          d = (d.array().rowwise() * (p.scale.transpose().array() * c.inv_std.array())).matrix();
        }
        break;
      }
      case LayerKind::dropout: {
        if (c.mask.size() > 0) d = d.cwiseProduct(c.mask);
        break;
      }
      case LayerKind::activation: {
        switch (s.activation) {
          case Activation::relu:
            d = d.cwiseProduct((c.input.array() > 0.0).cast<double>().matrix());
            break;
          case Activation::leaky_relu:
            d = d.cwiseProduct(c.input.unaryExpr(
                [&](double v) { return v > 0.0 ? 1.0 : s.leaky_ratio; }));
            break;
          case Activation::tanh:
            d = d.cwiseProduct((1.0 - c.output.array().square()).matrix());
            break;
          case Activation::sigmoid:
            d = d.cwiseProduct((c.output.array() * (1.0 - c.output.array())).matrix());
            break;
          case Activation::softmax:
          case Activation::gumbel_softmax: {
            // dx = y .* (dy - rowsum(y .* dy)), divided by the temperature
            // for the Gumbel path.
            Eigen::VectorXd dot = (c.output.cwiseProduct(d)).rowwise().sum();
            Eigen::MatrixXd dx = d;
            dx.colwise() -= dot;
            dx = dx.cwiseProduct(c.output);
            if (s.activation == Activation::gumbel_softmax) dx /= s.temperature;
            d = std::move(dx);
            break;
          }
        }
        break;
      }
    }
  }
  grads.input = std::move(d);
  return grads;
}

AdamState make_adam(const Network& net, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  st.first_moment.resize(net.params.size());
  st.second_moment.resize(net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    const auto& p = net.params[i];
    auto zero_like = [](const auto& m) {
      return std::decay_t<decltype(m)>::Zero(m.rows(), m.cols());
    };
    if (p.weight.size()) {
      st.first_moment[i].weight = zero_like(p.weight);
      st.second_moment[i].weight = zero_like(p.weight);
      st.first_moment[i].bias = Eigen::VectorXd::Zero(p.bias.size());
      st.second_moment[i].bias = Eigen::VectorXd::Zero(p.bias.size());
    }
    if (p.scale.size()) {
      st.first_moment[i].scale = Eigen::VectorXd::Zero(p.scale.size());
      st.second_moment[i].scale = Eigen::VectorXd::Zero(p.scale.size());
      st.first_moment[i].shift = Eigen::VectorXd::Zero(p.shift.size());
      st.second_moment[i].shift = Eigen::VectorXd::Zero(p.shift.size());
    }
  }
  return st;
}

namespace {

template <typename M>
void adam_update(M& param, const M& grad, M& m, M& v, const AdamState& st, double corr1,
                 double corr2) {
  m = st.beta1 * m + (1.0 - st.beta1) * grad;
  v = st.beta2 * v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  param.array() -= st.learning_rate * (m.array() / corr1) /
                   ((v.array() / corr2).sqrt() + st.epsilon);
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  if (grads.layers.size() != net.params.size())
    throw Error("adam_step: gradient/parameter count mismatch");

  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    bool finite = true;
    if (g.weight.size()) finite = finite && g.weight.allFinite() && g.bias.allFinite();
    if (g.scale.size()) finite = finite && g.scale.allFinite() && g.shift.allFinite();
    if (!finite)
      throw NumericalError("adam_step: non-finite gradient at layer " + std::to_string(i) +
                           " (" + kind_name(net.spec[i].kind) + ")");
  }

  ++state.step;
  double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    auto& p = net.params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (g.weight.size()) {
      adam_update(p.weight, g.weight, m.weight, v.weight, state, corr1, corr2);
      adam_update(p.bias, g.bias, m.bias, v.bias, state, corr1, corr2);
    }
    if (g.scale.size()) {
      adam_update(p.scale, g.scale, m.scale, v.scale, state, corr1, corr2);
      adam_update(p.shift, g.shift, m.shift, v.shift, state, corr1, corr2);
    }
  }
}

Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw ConfigError("gumbel_softmax: temperature must be > 0");
  Eigen::VectorXd u = logits;
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += rng.gumbel();
  u /= temperature;
  double mx = u.maxCoeff();
  Eigen::VectorXd e = (u.array() - mx).exp();
  return e / e.sum();
}

}  // namespace rebal::neural
