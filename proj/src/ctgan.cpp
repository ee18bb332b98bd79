#include "rebal/ctgan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rebal/binio.hpp"

namespace rebal::ctgan {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using neural::Activation;
using neural::build_network;
using neural::LayerSpec;
using neural::make_adam;
using neural::Mode;
using neural::Network;

constexpr std::uint32_t kBundleVersion = 1;
constexpr char kBundleMagic[9] = "RBLCTGAN";

std::vector<double> log_frequency_weights(const std::vector<long>& counts) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    w[i] = std::log1p(static_cast<double>(counts[i]));
  return w;
}

// ---------------------------------------------------------------------------
// Generator assembly

struct GenForward {
  neural::Forward b1, b2, b3, b4;
  std::vector<neural::Forward> alpha, mode, cat;
  MatrixXd x1, x2;
  MatrixXd rows;  // assembled encoded-row outputs
};

MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Writes head outputs into the encoded-row layout.
void assemble_rows(const EncodedLayout& layout, GenForward& fw) {
  auto n = fw.b4.output.rows();
  fw.rows.resize(n, layout.width);
  for (std::size_t i = 0; i < layout.continuous.size(); ++i) {
    const auto& block = layout.continuous[i];
    fw.rows.col(block.alpha_offset) = fw.alpha[i].output.col(0);
    fw.rows.block(0, block.mode_offset, n, block.modes) = fw.mode[i].output;
  }
  for (std::size_t i = 0; i < layout.discrete.size(); ++i) {
    const auto& block = layout.discrete[i];
    fw.rows.block(0, block.offset, n, block.size) = fw.cat[i].output;
  }
}

GenForward gen_forward(CtganModel& m, const EncodedLayout& layout, const MatrixXd& z,
                       const MatrixXd& cond, Mode mode, Rng* rng) {
  GenForward fw;
  MatrixXd x0 = hcat(z, cond);
  fw.b1 = neural::forward(m.g_block1, x0, mode, rng);
  fw.x1 = hcat(x0, fw.b1.output);
  fw.b2 = neural::forward(m.g_block2, fw.x1, mode, rng);
  fw.x2 = hcat(fw.x1, fw.b2.output);
  fw.b3 = neural::forward(m.g_block3, fw.x2, mode, rng);
  fw.b4 = neural::forward(m.g_block4, fw.b3.output, mode, rng);

  fw.alpha.resize(m.alpha_heads.size());
  fw.mode.resize(m.mode_heads.size());
  fw.cat.resize(m.cat_heads.size());
  for (std::size_t i = 0; i < m.alpha_heads.size(); ++i)
    fw.alpha[i] = neural::forward(m.alpha_heads[i], fw.b4.output, mode, rng);
  for (std::size_t i = 0; i < m.mode_heads.size(); ++i)
    fw.mode[i] = neural::forward(m.mode_heads[i], fw.b4.output, mode, rng);
  for (std::size_t i = 0; i < m.cat_heads.size(); ++i)
    fw.cat[i] = neural::forward(m.cat_heads[i], fw.b4.output, mode, rng);

  assemble_rows(layout, fw);
  return fw;
}

struct GenGradients {
  neural::Gradients b1, b2, b3, b4;
  std::vector<neural::Gradients> alpha, mode, cat;
};

GenGradients gen_backward(const CtganModel& m, const EncodedLayout& layout, const GenForward& fw,
                          const MatrixXd& d_rows) {
  GenGradients g;
  auto n = d_rows.rows();
  MatrixXd d_h4 = MatrixXd::Zero(n, fw.b4.output.cols());

  g.alpha.resize(m.alpha_heads.size());
  g.mode.resize(m.mode_heads.size());
  g.cat.resize(m.cat_heads.size());
  for (std::size_t i = 0; i < layout.continuous.size(); ++i) {
    const auto& block = layout.continuous[i];
    g.alpha[i] = neural::backward(m.alpha_heads[i], fw.alpha[i],
                                  d_rows.col(block.alpha_offset));
    d_h4 += g.alpha[i].input;
    g.mode[i] = neural::backward(m.mode_heads[i], fw.mode[i],
                                 d_rows.block(0, block.mode_offset, n, block.modes));
    d_h4 += g.mode[i].input;
  }
  for (std::size_t i = 0; i < layout.discrete.size(); ++i) {
    const auto& block = layout.discrete[i];
    g.cat[i] = neural::backward(m.cat_heads[i], fw.cat[i],
                                d_rows.block(0, block.offset, n, block.size));
    d_h4 += g.cat[i].input;
  }

  g.b4 = neural::backward(m.g_block4, fw.b4, d_h4);
  g.b3 = neural::backward(m.g_block3, fw.b3, g.b4.input);
  // x2 = [x1, a2]; x1 = [x0, a1].
  auto w1 = fw.x1.cols();
  MatrixXd d_x1 = g.b3.input.leftCols(w1);
  g.b2 = neural::backward(m.g_block2, fw.b2, g.b3.input.rightCols(fw.b2.output.cols()));
  d_x1 += g.b2.input;
  g.b1 = neural::backward(m.g_block1, fw.b1,
                          d_x1.rightCols(fw.b1.output.cols()));
  return g;
}

// ---------------------------------------------------------------------------
// Pac assembly

MatrixXd assemble_pacs(const MatrixXd& rows, const MatrixXd& cond, int pac) {
  auto n = rows.rows();
  auto n_pac = n / pac;
  auto rw = rows.cols();
  auto cw = cond.cols();
  MatrixXd out(n_pac, pac * (rw + cw));
  for (Eigen::Index p = 0; p < n_pac; ++p) {
    for (int j = 0; j < pac; ++j) {
      out.block(p, j * rw, 1, rw) = rows.row(p * pac + j);
      out.block(p, pac * rw + j * cw, 1, cw) = cond.row(p * pac + j);
    }
  }
  return out;
}

// Gradient of the pac input with respect to the member rows (cond part dropped).
MatrixXd unstack_row_grads(const MatrixXd& d_pacs, int pac, Eigen::Index rw) {
  auto n_pac = d_pacs.rows();
  MatrixXd out(n_pac * pac, rw);
  for (Eigen::Index p = 0; p < n_pac; ++p)
    for (int j = 0; j < pac; ++j)
      out.row(p * pac + j) = d_pacs.block(p, j * rw, 1, rw);
  return out;
}

Network build_generator_block(int in, int out, bool relu, double leaky, Rng& rng) {
  std::vector<LayerSpec> spec{LayerSpec::dense(in, out), LayerSpec::batch_norm(out),
                              LayerSpec::act(out, relu ? Activation::relu : Activation::leaky_relu,
                                             leaky)};
  return build_network(std::move(spec), rng);
}

}  // namespace

void CtganConfig::validate() const {
  if (epochs < 0) throw ConfigError("ctgan: epochs must be >= 0");
  if (pac < 1) throw ConfigError("ctgan: pac must be >= 1");
  if (batch_size < 1 || batch_size % pac != 0)
    throw ConfigError("ctgan: batch_size must be a positive multiple of pac");
  if (z_dim < 1) throw ConfigError("ctgan: z_dim must be >= 1");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0))
    throw ConfigError("ctgan: learning rates must be > 0");
  if (!(gumbel_temperature > 0.0)) throw ConfigError("ctgan: temperature must be > 0");
  if (!(leaky_ratio > 0.0 && leaky_ratio < 1.0)) throw ConfigError("ctgan: leaky ratio in (0,1)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("ctgan: dropout rate in [0,1)");
}

CondLayout CondLayout::build(const DataSchema& schema) {
  CondLayout layout;
  int offset = 0;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (schema.columns[c].kind != ColumnKind::discrete) continue;
    layout.column.push_back(static_cast<int>(c));
    layout.offset.push_back(offset);
    layout.size.push_back(static_cast<int>(schema.columns[c].categories.size()));
    offset += layout.size.back();
  }
  layout.width = offset;
  return layout;
}

int CondLayout::block_of_column(int schema_column) const {
  for (std::size_t b = 0; b < column.size(); ++b)
    if (column[b] == schema_column) return static_cast<int>(b);
  return -1;
}

CondVector build_cond_vector(const DataSchema& schema, int column, int category) {
  if (column < 0 || column >= static_cast<int>(schema.columns.size()))
    throw ConfigError("cond vector: column index out of range");
  if (schema.columns[static_cast<std::size_t>(column)].kind != ColumnKind::discrete)
    throw ConfigError("cond vector: column '" +
                      schema.columns[static_cast<std::size_t>(column)].name +
                      "' is continuous");
  auto layout = CondLayout::build(schema);
  int block = layout.block_of_column(column);
  if (category < 0 || category >= layout.size[static_cast<std::size_t>(block)])
    throw ConfigError("cond vector: bad category index");
  CondVector cv;
  cv.values = VectorXd::Zero(layout.width);
  cv.values[layout.offset[static_cast<std::size_t>(block)] + category] = 1.0;
  cv.column = column;
  cv.category = category;
  return cv;
}

CondVector build_cond_vector(const DataSchema& schema, const std::string& column, int category) {
  int c = schema.column_index(column);
  if (c < 0) throw ConfigError("cond vector: unknown column '" + column + "'");
  return build_cond_vector(schema, c, category);
}

std::pair<int, int> sample_training_condition(const Dataset& data, const DataSchema& schema,
                                              Rng& rng) {
  std::vector<int> discrete;
  for (std::size_t c = 0; c < schema.columns.size(); ++c)
    if (schema.columns[c].kind == ColumnKind::discrete) discrete.push_back(static_cast<int>(c));
  if (discrete.empty()) throw ConfigError("sample_training_condition: no discrete columns");
  int col = discrete[rng.uniform_int(discrete.size())];
  auto weights = log_frequency_weights(data.category_counts(col));
  return {col, rng.categorical(weights)};
}

CtganModel train(const Dataset& data, const CtganConfig& config) {
  config.validate();
  const auto& schema = data.schema();
  schema.validate();
  data.validate();

  CtganModel m;
  m.schema = schema;
  m.config = config;
  m.cond = CondLayout::build(schema);

  auto n = static_cast<long>(data.n_rows());
  if (n < config.pac) throw DataError("ctgan: fewer rows than one pac");

  m.mode_models = fit_mode_models(data, modenorm::kDefaultMaxModes,
                                  modenorm::kDefaultWeightThreshold,
                                  Rng::substream_seed(config.seed, "vgm"));
  RowEncoder encoder(schema, m.mode_models);
  const auto& layout = encoder.layout();
  m.encoded_width = layout.width;

  // One-time stochastic encode; mode indicators stay fixed across epochs.
  Rng encode_rng = Rng::substream(config.seed, "encode");
  MatrixXd real = encoder.encode_dataset(data, encode_rng);

  // Per-block category frequencies and matching row index lists.
  std::vector<std::vector<double>> block_logw(m.cond.column.size());
  std::vector<std::vector<std::vector<std::size_t>>> block_rows(m.cond.column.size());
  m.category_counts.resize(m.cond.column.size());
  for (std::size_t b = 0; b < m.cond.column.size(); ++b) {
    int col = m.cond.column[b];
    m.category_counts[b] = data.category_counts(col);
    block_logw[b] = log_frequency_weights(m.category_counts[b]);
    double total = 0.0;
    for (double w : block_logw[b]) total += w;
    if (!(total > 0.0))
      throw DataError("ctgan: discrete column '" + schema.column(col).name +
                      "' has no populated category");
    block_rows[b].resize(m.category_counts[b].size());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
      auto cat = static_cast<std::size_t>(data.at(r, static_cast<std::size_t>(col)));
      block_rows[b][cat].push_back(r);
    }
  }

  // Networks per the fixed four-layer architectures.
  Rng init_rng = Rng::substream(config.seed, "init");
  int w0 = config.z_dim + m.cond.width;
  m.g_block1 = build_generator_block(w0, 256, true, config.leaky_ratio, init_rng);
  m.g_block2 = build_generator_block(w0 + 256, 256, true, config.leaky_ratio, init_rng);
  m.g_block3 = build_generator_block(w0 + 512, 256, false, config.leaky_ratio, init_rng);
  m.g_block4 = build_network({LayerSpec::dense(256, 128),
                              LayerSpec::act(128, Activation::leaky_relu, config.leaky_ratio)},
                             init_rng);
  for (const auto& block : layout.continuous) {
    m.alpha_heads.push_back(build_network(
        {LayerSpec::dense(128, 1), LayerSpec::act(1, Activation::tanh)}, init_rng));
    m.mode_heads.push_back(build_network(
        {LayerSpec::dense(128, block.modes),
         LayerSpec::act(block.modes, Activation::gumbel_softmax, config.leaky_ratio,
                        config.gumbel_temperature)},
        init_rng));
  }
  for (const auto& block : layout.discrete) {
    m.cat_heads.push_back(build_network(
        {LayerSpec::dense(128, block.size),
         LayerSpec::act(block.size, Activation::gumbel_softmax, config.leaky_ratio,
                        config.gumbel_temperature)},
        init_rng));
  }
  {
    int pac_width = config.pac * (layout.width + m.cond.width);
    std::vector<LayerSpec> d_spec;
    int widths[5] = {pac_width, 256, 256, 128, 64};
    for (int l = 0; l < 4; ++l) {
      d_spec.push_back(LayerSpec::dense(widths[l], widths[l + 1]));
      d_spec.push_back(LayerSpec::act(widths[l + 1], Activation::leaky_relu, config.leaky_ratio));
      d_spec.push_back(LayerSpec::dropout(widths[l + 1], config.dropout_rate));
    }
    d_spec.push_back(LayerSpec::dense(64, 1));
    m.discriminator = build_network(std::move(d_spec), init_rng);
  }

  if (config.epochs == 0) return m;

  auto g_adam_b1 = make_adam(m.g_block1, config.lr_generator);
  auto g_adam_b2 = make_adam(m.g_block2, config.lr_generator);
  auto g_adam_b3 = make_adam(m.g_block3, config.lr_generator);
  auto g_adam_b4 = make_adam(m.g_block4, config.lr_generator);
  std::vector<neural::AdamState> adam_alpha, adam_mode, adam_cat;
  for (auto& net : m.alpha_heads) adam_alpha.push_back(make_adam(net, config.lr_generator));
  for (auto& net : m.mode_heads) adam_mode.push_back(make_adam(net, config.lr_generator));
  for (auto& net : m.cat_heads) adam_cat.push_back(make_adam(net, config.lr_generator));
  auto d_adam = make_adam(m.discriminator, config.lr_discriminator);

  int eb = std::min<long>(config.batch_size, (n / config.pac) * config.pac);
  int steps_per_epoch = static_cast<int>((n + eb - 1) / eb);
  int n_pac = eb / config.pac;

  Rng rng = Rng::substream(config.seed, "train");

  auto draw_cond_batch = [&](MatrixXd& cond, std::vector<int>& sel_block,
                             std::vector<int>& sel_cat) {
    cond.setZero(eb, m.cond.width);
    for (int i = 0; i < eb; ++i) {
      auto b = static_cast<std::size_t>(rng.uniform_int(m.cond.column.size()));
      int cat = rng.categorical(block_logw[b]);
      sel_block[static_cast<std::size_t>(i)] = static_cast<int>(b);
      sel_cat[static_cast<std::size_t>(i)] = cat;
      cond(i, m.cond.offset[b] + cat) = 1.0;
    }
  };

  auto draw_z = [&](MatrixXd& z) {
    z.resize(eb, config.z_dim);
    for (int r = 0; r < eb; ++r)
      for (int c = 0; c < config.z_dim; ++c) z(r, c) = rng.normal();
  };

  auto apply_gen_grads = [&](const GenGradients& g) {
    adam_step(m.g_block1, g.b1, g_adam_b1);
    adam_step(m.g_block2, g.b2, g_adam_b2);
    adam_step(m.g_block3, g.b3, g_adam_b3);
    adam_step(m.g_block4, g.b4, g_adam_b4);
    for (std::size_t i = 0; i < m.alpha_heads.size(); ++i) {
      adam_step(m.alpha_heads[i], g.alpha[i], adam_alpha[i]);
      adam_step(m.mode_heads[i], g.mode[i], adam_mode[i]);
    }
    for (std::size_t i = 0; i < m.cat_heads.size(); ++i)
      adam_step(m.cat_heads[i], g.cat[i], adam_cat[i]);
  };

  MatrixXd cond(eb, m.cond.width), z;
  std::vector<int> sel_block(static_cast<std::size_t>(eb)), sel_cat(static_cast<std::size_t>(eb));
  MatrixXd real_batch(eb, layout.width);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_d = 0.0, epoch_g = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      // --- discriminator update ---
      draw_cond_batch(cond, sel_block, sel_cat);
      for (int i = 0; i < eb; ++i) {
        const auto& rows =
            block_rows[static_cast<std::size_t>(sel_block[static_cast<std::size_t>(i)])]
                      [static_cast<std::size_t>(sel_cat[static_cast<std::size_t>(i)])];
        real_batch.row(i) = real.row(static_cast<Eigen::Index>(
            rows[rng.uniform_int(rows.size())]));
      }
      draw_z(z);
      GenForward fake_fw = gen_forward(m, layout, z, cond, Mode::train, &rng);

      MatrixXd real_pacs = assemble_pacs(real_batch, cond, config.pac);
      MatrixXd fake_pacs = assemble_pacs(fake_fw.rows, cond, config.pac);
      auto real_out = neural::forward(m.discriminator, real_pacs, Mode::train, &rng);
      auto fake_out = neural::forward(m.discriminator, fake_pacs, Mode::train, &rng);

      double d_loss = 0.0;
      VectorXd d_real(n_pac), d_fake(n_pac);
      for (int p = 0; p < n_pac; ++p) {
        double lr_logit = real_out.output(p, 0);
        double lf_logit = fake_out.output(p, 0);
        d_loss += softplus(-lr_logit) + softplus(lf_logit);
        d_real[p] = -sigmoid(-lr_logit) / n_pac;
        d_fake[p] = sigmoid(lf_logit) / n_pac;
      }
      d_loss /= n_pac;
      if (!std::isfinite(d_loss))
        throw NumericalError("ctgan: non-finite discriminator loss at epoch " +
                             std::to_string(epoch) + " step " + std::to_string(step));

      auto d_grads_real = neural::backward(m.discriminator, real_out, d_real);
      auto d_grads_fake = neural::backward(m.discriminator, fake_out, d_fake);
      // Sum the two passes before the optimizer step.
      for (std::size_t l = 0; l < d_grads_real.layers.size(); ++l) {
        auto& a = d_grads_real.layers[l];
        const auto& b = d_grads_fake.layers[l];
        if (a.weight.size()) {
          a.weight += b.weight;
          a.bias += b.bias;
        }
        if (a.scale.size()) {
          a.scale += b.scale;
          a.shift += b.shift;
        }
      }
      adam_step(m.discriminator, d_grads_real, d_adam);

      // --- generator update ---
      draw_cond_batch(cond, sel_block, sel_cat);
      draw_z(z);
      GenForward gen_fw = gen_forward(m, layout, z, cond, Mode::train, &rng);
      MatrixXd gen_pacs = assemble_pacs(gen_fw.rows, cond, config.pac);
      auto gen_out = neural::forward(m.discriminator, gen_pacs, Mode::train, &rng);

      double adv_loss = 0.0;
      VectorXd d_logit(n_pac);
      for (int p = 0; p < n_pac; ++p) {
        double lf_logit = gen_out.output(p, 0);
        adv_loss += softplus(-lf_logit);
        d_logit[p] = -sigmoid(-lf_logit) / n_pac;
      }
      adv_loss /= n_pac;

      auto through_d = neural::backward(m.discriminator, gen_out, d_logit);
      MatrixXd d_rows = unstack_row_grads(through_d.input, config.pac, layout.width);

      // Conditional cross-entropy on the selected block of each sample.
      double ce_loss = 0.0;
      for (int i = 0; i < eb; ++i) {
        auto b = static_cast<std::size_t>(sel_block[static_cast<std::size_t>(i)]);
        int cat = sel_cat[static_cast<std::size_t>(i)];
        int off = m.cond.offset[b];
        int pos = layout.discrete[b].offset + cat;
        double p_cat = std::max(gen_fw.rows(i, pos), 1e-290);
        ce_loss -= std::log(p_cat);
        d_rows(i, pos) += -1.0 / (p_cat * eb);
        (void)off;
      }
      ce_loss /= eb;

      double g_loss = adv_loss + ce_loss;
      if (!std::isfinite(g_loss))
        throw NumericalError("ctgan: non-finite generator loss at epoch " +
                             std::to_string(epoch) + " step " + std::to_string(step));

      GenGradients g_grads = gen_backward(m, layout, gen_fw, d_rows);
      apply_gen_grads(g_grads);

      epoch_d += d_loss;
      epoch_g += g_loss;
    }
    m.history.discriminator_loss.push_back(epoch_d / steps_per_epoch);
    m.history.generator_loss.push_back(epoch_g / steps_per_epoch);
  }
  return m;
}

namespace {

// Sampling pass on an immutable model: the body runs deterministically on
// running statistics, while the Gumbel-softmax heads keep their noise so the
// decoder's argmax draws each category with its learned probability.
MatrixXd gen_sample(const CtganModel& m, const EncodedLayout& layout, const MatrixXd& z,
                    const MatrixXd& cond, Rng& rng) {
  MatrixXd x0 = hcat(z, cond);
  MatrixXd a1 = neural::infer(m.g_block1, x0);
  MatrixXd x1 = hcat(x0, a1);
  MatrixXd a2 = neural::infer(m.g_block2, x1);
  MatrixXd x2 = hcat(x1, a2);
  MatrixXd x3 = neural::infer(m.g_block3, x2);
  MatrixXd h4 = neural::infer(m.g_block4, x3);

  auto noisy_head = [&](const Network& head) {
    // Head layout is [dense, gumbel-softmax]; noise is injected per draw.
    const auto& dense = head.params[0];
    double temperature = head.spec[1].temperature;
    MatrixXd logits = h4 * dense.weight;
    logits.rowwise() += dense.bias.transpose();
    MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r)
      out.row(r) =
          neural::gumbel_softmax(logits.row(r).transpose(), temperature, rng).transpose();
    return out;
  };

  MatrixXd rows(z.rows(), layout.width);
  for (std::size_t i = 0; i < layout.continuous.size(); ++i) {
    const auto& block = layout.continuous[i];
    rows.col(block.alpha_offset) = neural::infer(m.alpha_heads[i], h4).col(0);
    rows.block(0, block.mode_offset, z.rows(), block.modes) = noisy_head(m.mode_heads[i]);
  }
  for (std::size_t i = 0; i < layout.discrete.size(); ++i) {
    const auto& block = layout.discrete[i];
    rows.block(0, block.offset, z.rows(), block.size) = noisy_head(m.cat_heads[i]);
  }
  return rows;
}

MatrixXd generate_raw_impl(const CtganModel& model, long n,
                           const std::optional<Condition>& condition, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate: n must be >= 1");
  RowEncoder encoder = model.make_encoder();
  const auto& layout = encoder.layout();

  int fixed_block = -1, fixed_cat = -1;
  if (condition) {
    int col = model.schema.column_index(condition->column);
    if (col < 0) throw ConfigError("generate: unknown condition column '" + condition->column + "'");
    int cat = model.schema.category_index(col, condition->category);
    if (cat < 0)
      throw ConfigError("generate: unknown condition category '" + condition->category + "'");
    fixed_block = model.cond.block_of_column(col);
    if (fixed_block < 0)
      throw ConfigError("generate: condition column '" + condition->column + "' is continuous");
    fixed_cat = cat;
  }

  std::vector<std::vector<double>> block_logw(model.category_counts.size());
  for (std::size_t b = 0; b < model.category_counts.size(); ++b)
    block_logw[b] = log_frequency_weights(model.category_counts[b]);

  Rng rng = Rng::substream(seed, "generate");
  MatrixXd out(n, layout.width);
  long done = 0;
  while (done < n) {
    auto bs = std::min<long>(model.config.batch_size, n - done);
    MatrixXd z(bs, model.config.z_dim);
    for (Eigen::Index r = 0; r < bs; ++r)
      for (int c = 0; c < model.config.z_dim; ++c) z(r, c) = rng.normal();
    MatrixXd cond = MatrixXd::Zero(bs, model.cond.width);
    for (Eigen::Index r = 0; r < bs; ++r) {
      std::size_t b;
      int cat;
      if (fixed_block >= 0) {
        b = static_cast<std::size_t>(fixed_block);
        cat = fixed_cat;
      } else {
        b = static_cast<std::size_t>(rng.uniform_int(model.cond.column.size()));
        cat = rng.categorical(block_logw[b]);
      }
      cond(r, model.cond.offset[b] + cat) = 1.0;
    }
    out.middleRows(done, bs) = gen_sample(model, layout, z, cond, rng);
    done += bs;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd generate_raw(const CtganModel& model, long n,
                             const std::optional<Condition>& condition, std::uint64_t seed) {
  return generate_raw_impl(model, n, condition, seed);
}

Dataset generate(const CtganModel& model, long n, const std::optional<Condition>& condition,
                 std::uint64_t seed) {
  MatrixXd raw = generate_raw_impl(model, n, condition, seed);
  RowEncoder encoder = model.make_encoder();
  Dataset out = encoder.decode_rows(raw);
  out.validate();
  return out;
}

Eigen::VectorXd discriminator_scores(const CtganModel& model, const Eigen::MatrixXd& encoded_rows,
                                     const Eigen::MatrixXd& cond_rows) {
  if (encoded_rows.rows() % model.config.pac != 0)
    throw DataError("discriminator_scores: row count not a multiple of pac");
  if (encoded_rows.rows() != cond_rows.rows())
    throw DataError("discriminator_scores: rows/conds mismatch");
  MatrixXd pacs = assemble_pacs(encoded_rows, cond_rows, model.config.pac);
  MatrixXd logits = neural::infer(model.discriminator, pacs);
  return logits.col(0).unaryExpr([](double v) { return sigmoid(v); });
}

// ---------------------------------------------------------------------------
// Bundle io

namespace {

void write_network(BinaryWriter& w, const Network& net) {
  w.u64(net.spec.size());
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const auto& s = net.spec[i];
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.activation));
    w.i64(s.in_dim);
    w.i64(s.out_dim);
    w.f64(s.leaky_ratio);
    w.f64(s.dropout_rate);
    w.f64(s.temperature);
    const auto& p = net.params[i];
    w.mat(p.weight);
    w.vec(p.bias);
    w.vec(p.scale);
    w.vec(p.shift);
    w.vec(p.running_mean);
    w.vec(p.running_var);
  }
}

Network read_network(BinaryReader& r) {
  Network net;
  auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerSpec s;
    s.kind = static_cast<neural::LayerKind>(r.u32());
    s.activation = static_cast<Activation>(r.u32());
    s.in_dim = static_cast<int>(r.i64());
    s.out_dim = static_cast<int>(r.i64());
    s.leaky_ratio = r.f64();
    s.dropout_rate = r.f64();
    s.temperature = r.f64();
    neural::LayerParams p;
    p.weight = r.mat();
    p.bias = r.vec();
    p.scale = r.vec();
    p.shift = r.vec();
    p.running_mean = r.vec();
    p.running_var = r.vec();
    net.spec.push_back(s);
    net.params.push_back(std::move(p));
  }
  return net;
}

}  // namespace

void save_bundle(const CtganModel& model, const std::string& path) {
  BinaryWriter w(path);
  w.raw(kBundleMagic, 8);
  w.u32(kBundleVersion);
  w.str(format_schema(model.schema));

  w.i64(model.config.epochs);
  w.f64(model.config.lr_generator);
  w.f64(model.config.lr_discriminator);
  w.i64(model.config.batch_size);
  w.i64(model.config.pac);
  w.i64(model.config.z_dim);
  w.f64(model.config.gumbel_temperature);
  w.f64(model.config.leaky_ratio);
  w.f64(model.config.dropout_rate);
  w.u64(model.config.seed);

  w.u64(model.mode_models.size());
  for (const auto& mm : model.mode_models) {
    w.str(mm.column);
    w.u32(mm.degenerate ? 1 : 0);
    w.u64(mm.modes.size());
    for (const auto& mode : mm.modes) {
      w.f64(mode.weight);
      w.f64(mode.mean);
      w.f64(mode.std);
    }
  }

  w.u64(model.category_counts.size());
  for (const auto& counts : model.category_counts) {
    w.u64(counts.size());
    for (long c : counts) w.i64(c);
  }

  w.i64(model.encoded_width);
  write_network(w, model.g_block1);
  write_network(w, model.g_block2);
  write_network(w, model.g_block3);
  write_network(w, model.g_block4);
  w.u64(model.alpha_heads.size());
  for (const auto& net : model.alpha_heads) write_network(w, net);
  w.u64(model.mode_heads.size());
  for (const auto& net : model.mode_heads) write_network(w, net);
  w.u64(model.cat_heads.size());
  for (const auto& net : model.cat_heads) write_network(w, net);
  write_network(w, model.discriminator);

  w.u64(model.history.generator_loss.size());
  for (std::size_t i = 0; i < model.history.generator_loss.size(); ++i) {
    w.f64(model.history.generator_loss[i]);
    w.f64(model.history.discriminator_loss[i]);
  }
}

CtganModel load_bundle(const std::string& path) {
  BinaryReader r(path);
  char magic[9] = {};
  r.raw(magic, 8);
  if (std::string(magic) != kBundleMagic) throw DataError(path + ": not a model bundle");
  auto version = r.u32();
  if (version != kBundleVersion)
    throw DataError(path + ": unsupported bundle version " + std::to_string(version));

  CtganModel m;
  m.schema = parse_schema(r.str(), path + " (embedded schema)");

  m.config.epochs = static_cast<int>(r.i64());
  m.config.lr_generator = r.f64();
  m.config.lr_discriminator = r.f64();
  m.config.batch_size = static_cast<int>(r.i64());
  m.config.pac = static_cast<int>(r.i64());
  m.config.z_dim = static_cast<int>(r.i64());
  m.config.gumbel_temperature = r.f64();
  m.config.leaky_ratio = r.f64();
  m.config.dropout_rate = r.f64();
  m.config.seed = r.u64();

  auto n_models = r.u64();
  for (std::uint64_t i = 0; i < n_models; ++i) {
    modenorm::ModeModel mm;
    mm.column = r.str();
    mm.degenerate = r.u32() != 0;
    auto n_modes = r.u64();
    for (std::uint64_t j = 0; j < n_modes; ++j) {
      modenorm::GaussianMode mode;
      mode.weight = r.f64();
      mode.mean = r.f64();
      mode.std = r.f64();
      mm.modes.push_back(mode);
    }
    m.mode_models.push_back(std::move(mm));
  }

  auto n_blocks = r.u64();
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    auto sz = r.u64();
    std::vector<long> counts(sz);
    for (auto& c : counts) c = static_cast<long>(r.i64());
    m.category_counts.push_back(std::move(counts));
  }

  m.encoded_width = static_cast<int>(r.i64());
  m.g_block1 = read_network(r);
  m.g_block2 = read_network(r);
  m.g_block3 = read_network(r);
  m.g_block4 = read_network(r);
  auto n_alpha = r.u64();
  for (std::uint64_t i = 0; i < n_alpha; ++i) m.alpha_heads.push_back(read_network(r));
  auto n_mode = r.u64();
  for (std::uint64_t i = 0; i < n_mode; ++i) m.mode_heads.push_back(read_network(r));
  auto n_cat = r.u64();
  for (std::uint64_t i = 0; i < n_cat; ++i) m.cat_heads.push_back(read_network(r));
  m.discriminator = read_network(r);

  auto n_hist = r.u64();
  for (std::uint64_t i = 0; i < n_hist; ++i) {
    m.history.generator_loss.push_back(r.f64());
    m.history.discriminator_loss.push_back(r.f64());
  }

  m.cond = CondLayout::build(m.schema);
  RowEncoder encoder(m.schema, m.mode_models);
  if (encoder.layout().width != m.encoded_width)
    throw DataError(path + ": inconsistent encoded width");
  return m;
}

}  // namespace rebal::ctgan
