// Typed tabular data: schema, dataset, schema-file and CSV ingestion, splits.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebal/common.hpp"

namespace rebal {

enum class ColumnKind { continuous, discrete };
enum class LabelKind { binary, ordered };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> categories;  // discrete only; order fixes one-hot positions
};

// Immutable after validate(); safe to share across threads.
struct DataSchema {
  std::vector<Column> columns;
  std::string label_column;
  LabelKind label_kind = LabelKind::binary;

  void validate() const;

  int column_index(const std::string& name) const;  // -1 when absent
  const Column& column(int index) const { return columns.at(static_cast<std::size_t>(index)); }
  int label_index() const;
  int n_continuous() const;
  int n_discrete() const;
  int n_label_classes() const;
  int category_index(int column, const std::string& category) const;  // -1 when absent
};

// Rows stored flat, row-major; discrete cells hold the category index.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(DataSchema schema) : schema_(std::move(schema)) {}

  const DataSchema& schema() const { return schema_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return schema_.columns.size(); }

  double at(std::size_t row, std::size_t col) const {
    return values_[row * n_cols() + col];
  }
  void set(std::size_t row, std::size_t col, double v) {
    values_[row * n_cols() + col] = v;
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * n_cols(), n_cols()};
  }
  void append_row(std::span<const double> row);
  void reserve(std::size_t rows) { values_.reserve(rows * n_cols()); }

  int label_of(std::size_t row) const {
    return static_cast<int>(at(row, static_cast<std::size_t>(schema_.label_index())));
  }

  // Count per label category, indexed by category position.
  std::vector<long> class_counts() const;
  std::vector<long> category_counts(int column) const;

  // Throws DataError with row/column location on the first invalid cell.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  DataSchema schema_;
  std::vector<double> values_;
  std::size_t n_rows_ = 0;
};

// Schema files use the shared key=value grammar:
//   column = <name> continuous
//   column = <name> discrete <cat,cat,...>
//   label = <column-name>
//   label_kind = binary|ordered
DataSchema load_schema(const std::string& path);
DataSchema parse_schema(const std::string& text, const std::string& origin);
std::string format_schema(const DataSchema& schema);

// CSV: header row mandatory (order-insensitive vs schema), UTF-8, decimal
// point only, no quoting. Continuous cells must be finite; discrete cells
// must name a schema category. Errors carry row/column locations.
Dataset load_csv(const std::string& path, const DataSchema& schema);
Dataset parse_csv(const std::string& text, const DataSchema& schema, const std::string& origin);
void save_csv(const Dataset& data, const std::string& path);
std::string format_csv(const Dataset& data);

// Deterministic disjoint partition; |train| = round(fraction * N).
struct SplitResult {
  Dataset train;
  Dataset test;
};
SplitResult split(const Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace rebal
