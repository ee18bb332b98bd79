#include "rebal/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rebal/keyval.hpp"
#include "rebal/rng.hpp"

namespace rebal {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

}  // namespace

void DataSchema::validate() const {
  if (columns.empty()) throw ConfigError("schema: no columns");
  std::unordered_set<std::string> names;
  for (const auto& col : columns) {
    if (col.name.empty()) throw ConfigError("schema: empty column name");
    if (!names.insert(col.name).second)
      throw ConfigError("schema: duplicate column name '" + col.name + "'");
    if (col.kind == ColumnKind::discrete) {
      if (col.categories.size() < 2)
        throw ConfigError("schema: discrete column '" + col.name + "' needs >= 2 categories");
      std::unordered_set<std::string> cats;
      for (const auto& c : col.categories)
        if (!cats.insert(c).second)
          throw ConfigError("schema: duplicate category '" + c + "' in column '" + col.name + "'");
    } else if (!col.categories.empty()) {
      throw ConfigError("schema: continuous column '" + col.name + "' lists categories");
    }
  }
  int li = column_index(label_column);
  if (li < 0) throw ConfigError("schema: label column '" + label_column + "' not found");
  if (columns[static_cast<std::size_t>(li)].kind != ColumnKind::discrete)
    throw ConfigError("schema: label column '" + label_column + "' must be discrete");
  int classes = n_label_classes();
  if (label_kind == LabelKind::binary && classes != 2)
    throw ConfigError("schema: binary label needs exactly 2 categories");
  if (label_kind == LabelKind::ordered && classes < 3)
    throw ConfigError("schema: ordered label needs >= 3 categories");
}

int DataSchema::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return static_cast<int>(i);
  return -1;
}

int DataSchema::label_index() const {
  int i = column_index(label_column);
  if (i < 0) throw ConfigError("schema: label column '" + label_column + "' not found");
  return i;
}

int DataSchema::n_continuous() const {
  int n = 0;
  for (const auto& c : columns) n += c.kind == ColumnKind::continuous;
  return n;
}

int DataSchema::n_discrete() const {
  int n = 0;
  for (const auto& c : columns) n += c.kind == ColumnKind::discrete;
  return n;
}

int DataSchema::n_label_classes() const {
  return static_cast<int>(columns[static_cast<std::size_t>(label_index())].categories.size());
}

int DataSchema::category_index(int col, const std::string& category) const {
  const auto& cats = columns[static_cast<std::size_t>(col)].categories;
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i] == category) return static_cast<int>(i);
  return -1;
}

void Dataset::append_row(std::span<const double> row) {
  if (row.size() != n_cols()) throw DataError("append_row: width mismatch");
  values_.insert(values_.end(), row.begin(), row.end());
  ++n_rows_;
}

std::vector<long> Dataset::class_counts() const {
  return category_counts(schema_.label_index());
}

std::vector<long> Dataset::category_counts(int column) const {
  const auto& col = schema_.column(column);
  if (col.kind != ColumnKind::discrete)
    throw ConfigError("category_counts: column '" + col.name + "' is continuous");
  std::vector<long> counts(col.categories.size(), 0);
  for (std::size_t r = 0; r < n_rows_; ++r)
    ++counts[static_cast<std::size_t>(at(r, static_cast<std::size_t>(column)))];
  return counts;
}

void Dataset::validate() const {
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t c = 0; c < n_cols(); ++c) {
      const auto& col = schema_.columns[c];
      double v = at(r, c);
      if (col.kind == ColumnKind::continuous) {
        if (!std::isfinite(v))
          throw DataError("row " + std::to_string(r + 1) + ", column '" + col.name +
                          "': non-finite value");
      } else {
        auto idx = static_cast<long>(v);
        if (v != static_cast<double>(idx) || idx < 0 ||
            idx >= static_cast<long>(col.categories.size()))
          throw DataError("row " + std::to_string(r + 1) + ", column '" + col.name +
                          "': invalid category index");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out(schema_);
  out.reserve(rows.size());
  for (std::size_t r : rows) out.append_row(row(r));
  return out;
}

DataSchema parse_schema(const std::string& text, const std::string& origin) {
  KeyValueFile kv = parse_keyvalue(text, origin);
  DataSchema schema;
  for (const auto& entry : kv.entries) {
    if (entry.key == "column") {
      std::istringstream ss(entry.value);
      Column col;
      std::string kind, cats;
      ss >> col.name >> kind;
      if (col.name.empty() || kind.empty())
        throw ConfigError(origin + ":" + std::to_string(entry.line) +
                          ": column needs '<name> <kind> [categories]'");
      if (kind == "continuous") {
        col.kind = ColumnKind::continuous;
      } else if (kind == "discrete") {
        col.kind = ColumnKind::discrete;
        ss >> cats;
        if (cats.empty())
          throw ConfigError(origin + ":" + std::to_string(entry.line) +
                            ": discrete column '" + col.name + "' needs a category list");
        for (auto& c : split_fields(cats, ',')) {
          c = trim(c);
          if (c.empty())
            throw ConfigError(origin + ":" + std::to_string(entry.line) + ": empty category name");
          col.categories.push_back(c);
        }
      } else {
        throw ConfigError(origin + ":" + std::to_string(entry.line) + ": unknown column kind '" +
                          kind + "'");
      }
      schema.columns.push_back(std::move(col));
    } else if (entry.key == "label") {
      schema.label_column = trim(entry.value);
    } else if (entry.key == "label_kind") {
      std::string v = trim(entry.value);
      if (v == "binary")
        schema.label_kind = LabelKind::binary;
      else if (v == "ordered")
        schema.label_kind = LabelKind::ordered;
      else
        throw ConfigError(origin + ":" + std::to_string(entry.line) + ": label_kind must be " +
                          "'binary' or 'ordered'");
    } else {
      throw ConfigError(origin + ":" + std::to_string(entry.line) + ": unknown schema key '" +
                        entry.key + "'");
    }
  }
  schema.validate();
  return schema;
}

DataSchema load_schema(const std::string& path) {
  return parse_schema(read_file(path), path);
}

std::string format_schema(const DataSchema& schema) {
  std::ostringstream out;
  for (const auto& col : schema.columns) {
    out << "column = " << col.name;
    if (col.kind == ColumnKind::continuous) {
      out << " continuous\n";
    } else {
      out << " discrete ";
      for (std::size_t i = 0; i < col.categories.size(); ++i) {
        if (i) out << ',';
        out << col.categories[i];
      }
      out << '\n';
    }
  }
  out << "label = " << schema.label_column << '\n';
  out << "label_kind = " << (schema.label_kind == LabelKind::binary ? "binary" : "ordered")
      << '\n';
  return out.str();
}

Dataset parse_csv(const std::string& text, const DataSchema& schema, const std::string& origin) {
  schema.validate();
  if (text.empty()) throw DataError(origin + ": empty file");

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");

  auto header = split_fields(line, ',');
  for (auto& h : header) h = trim(h);

  // Header may permute schema order; remember where each schema column lives.
  std::vector<int> field_of(schema.columns.size(), -1);
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    for (std::size_t f = 0; f < header.size(); ++f)
      if (header[f] == schema.columns[c].name) {
        field_of[c] = static_cast<int>(f);
        break;
      }
    if (field_of[c] < 0)
      throw DataError(origin + ": missing column '" + schema.columns[c].name + "' in header");
  }

  std::vector<std::unordered_map<std::string, int>> cat_index(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c)
    for (std::size_t k = 0; k < schema.columns[c].categories.size(); ++k)
      cat_index[c][schema.columns[c].categories[k]] = static_cast<int>(k);

  Dataset data(schema);
  std::vector<double> row(schema.columns.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, ',');
    if (fields.size() != header.size())
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      std::string cell = trim(fields[static_cast<std::size_t>(field_of[c])]);
      if (cell.empty())
        throw DataError(origin + ":" + std::to_string(line_no) + ": column '" + col.name +
                        "': missing value");
      if (col.kind == ColumnKind::continuous) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
          throw DataError(origin + ":" + std::to_string(line_no) + ": column '" + col.name +
                          "': unparseable value '" + cell + "'");
        row[c] = v;
      } else {
        auto it = cat_index[c].find(cell);
        if (it == cat_index[c].end())
          throw DataError(origin + ":" + std::to_string(line_no) + ": column '" + col.name +
                          "': unknown category '" + cell + "'");
        row[c] = it->second;
      }
    }
    data.append_row(row);
  }
  return data;
}

Dataset load_csv(const std::string& path, const DataSchema& schema) {
  return parse_csv(read_file(path), schema, path);
}

std::string format_csv(const Dataset& data) {
  const auto& schema = data.schema();
  std::ostringstream out;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c) out << ',';
    out << schema.columns[c].name;
  }
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (c) out << ',';
      const auto& col = schema.columns[c];
      if (col.kind == ColumnKind::continuous) {
        std::snprintf(buf, sizeof(buf), "%.9g", data.at(r, c));
        out << buf;
      } else {
        out << col.categories[static_cast<std::size_t>(data.at(r, c))];
      }
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << format_csv(data);
}

SplitResult split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("split: train fraction must lie in (0,1)");
  if (data.n_rows() == 0) throw DataError("split: empty dataset");

  auto n = data.n_rows();
  auto train_n = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(train_n));
  std::vector<std::size_t> test_idx(idx.begin() + static_cast<long>(train_n), idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace rebal
