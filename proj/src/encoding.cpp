#include "rebal/encoding.hpp"

#include <cmath>

namespace rebal {

RowEncoder::RowEncoder(DataSchema schema, std::vector<modenorm::ModeModel> mode_models)
    : schema_(std::move(schema)), mode_models_(std::move(mode_models)) {
  schema_.validate();
  if (static_cast<int>(mode_models_.size()) != schema_.n_continuous())
    throw ConfigError("RowEncoder: need one mode model per continuous column");

  int offset = 0;
  std::size_t next_model = 0;
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColumnKind::continuous) {
      const auto& model = mode_models_[next_model];
      EncodedLayout::ContinuousBlock block;
      block.column = static_cast<int>(c);
      block.alpha_offset = offset;
      block.mode_offset = offset + 1;
      block.modes = model.n_modes();
      layout_.continuous.push_back(block);
      offset += 1 + block.modes;
      ++next_model;
    }
  }
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColumnKind::discrete) {
      EncodedLayout::DiscreteBlock block;
      block.column = static_cast<int>(c);
      block.offset = offset;
      block.size = static_cast<int>(schema_.columns[c].categories.size());
      layout_.discrete.push_back(block);
      offset += block.size;
    }
  }
  layout_.width = offset;
}

Eigen::VectorXd RowEncoder::encode(std::span<const double> row, Rng& rng) const {
  if (row.size() != schema_.columns.size()) throw DataError("encode: row width mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(layout_.width);
  for (std::size_t i = 0; i < layout_.continuous.size(); ++i) {
    const auto& block = layout_.continuous[i];
    auto norm = modenorm::normalize(row[static_cast<std::size_t>(block.column)],
                                    mode_models_[i], rng);
    out[block.alpha_offset] = norm.alpha;
    out[block.mode_offset + norm.mode] = 1.0;
  }
  for (const auto& block : layout_.discrete) {
    auto cat = static_cast<int>(row[static_cast<std::size_t>(block.column)]);
    if (cat < 0 || cat >= block.size) throw DataError("encode: category index out of range");
    out[block.offset + cat] = 1.0;
  }
  return out;
}

std::vector<double> RowEncoder::decode(const Eigen::VectorXd& encoded) const {
  if (encoded.size() != layout_.width) throw DataError("decode: encoded length mismatch");
  std::vector<double> row(schema_.columns.size(), 0.0);
  for (std::size_t i = 0; i < layout_.continuous.size(); ++i) {
    const auto& block = layout_.continuous[i];
    int mode = 0;
    encoded.segment(block.mode_offset, block.modes).maxCoeff(&mode);
    row[static_cast<std::size_t>(block.column)] =
        modenorm::denormalize(encoded[block.alpha_offset], mode, mode_models_[i]);
  }
  for (const auto& block : layout_.discrete) {
    int cat = 0;
    encoded.segment(block.offset, block.size).maxCoeff(&cat);
    row[static_cast<std::size_t>(block.column)] = cat;
  }
  return row;
}

Eigen::MatrixXd RowEncoder::encode_dataset(const Dataset& data, Rng& rng) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.n_rows()), layout_.width);
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = encode(data.row(r), rng).transpose();
  return out;
}

Dataset RowEncoder::decode_rows(const Eigen::MatrixXd& encoded) const {
  Dataset out(schema_);
  out.reserve(static_cast<std::size_t>(encoded.rows()));
  for (Eigen::Index r = 0; r < encoded.rows(); ++r) {
    auto row = decode(encoded.row(r).transpose());
    out.append_row(row);
  }
  return out;
}

std::vector<modenorm::ModeModel> fit_mode_models(const Dataset& data, int max_modes,
                                                 double weight_threshold, std::uint64_t seed) {
  std::vector<modenorm::ModeModel> models;
  const auto& schema = data.schema();
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (schema.columns[c].kind != ColumnKind::continuous) continue;
    std::vector<double> values(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r) values[r] = data.at(r, c);
    auto model = modenorm::fit_vgm(values, max_modes, weight_threshold,
                                   Rng::substream_seed(seed, "vgm-col:" + schema.columns[c].name));
    model.column = schema.columns[c].name;
    models.push_back(std::move(model));
  }
  return models;
}

}  // namespace rebal
