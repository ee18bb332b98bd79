#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "rebal/encoding.hpp"
#include "rebal/tabular.hpp"

using namespace rebal;

namespace {

DataSchema two_column_schema() {
  DataSchema schema;
  schema.columns = {{"speed", ColumnKind::continuous, {}},
                    {"severity", ColumnKind::discrete, {"nFI", "FI"}}};
  schema.label_column = "severity";
  schema.label_kind = LabelKind::binary;
  return schema;
}

// Random schema with >= 1 discrete label column.
DataSchema random_schema(Rng& rng) {
  DataSchema schema;
  int n_cont = static_cast<int>(rng.uniform_int(4));
  int n_disc = 1 + static_cast<int>(rng.uniform_int(3));
  for (int i = 0; i < n_cont; ++i)
    schema.columns.push_back({"c" + std::to_string(i), ColumnKind::continuous, {}});
  for (int i = 0; i < n_disc; ++i) {
    int cats = 2 + static_cast<int>(rng.uniform_int(4));
    Column col{"d" + std::to_string(i), ColumnKind::discrete, {}};
    for (int k = 0; k < cats; ++k) col.categories.push_back("k" + std::to_string(k));
    schema.columns.push_back(col);
  }
  schema.label_column = "d0";
  schema.label_kind =
      schema.columns[static_cast<std::size_t>(schema.column_index("d0"))].categories.size() >= 3
          ? LabelKind::ordered
          : LabelKind::binary;
  return schema;
}

Dataset random_dataset(const DataSchema& schema, std::size_t rows, Rng& rng) {
  Dataset data(schema);
  std::vector<double> row(schema.columns.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      row[c] = col.kind == ColumnKind::continuous
                   ? rng.normal(0.0, 3.0)
                   : static_cast<double>(rng.uniform_int(col.categories.size()));
    }
    data.append_row(row);
  }
  return data;
}

}  // namespace

TEST_CASE("schema validation catches defects") {
  DataSchema schema = two_column_schema();
  CHECK_NOTHROW(schema.validate());

  SUBCASE("duplicate column name") {
    schema.columns.push_back({"speed", ColumnKind::continuous, {}});
    CHECK_THROWS_AS(schema.validate(), ConfigError);
  }
  SUBCASE("label must be discrete") {
    schema.label_column = "speed";
    CHECK_THROWS_AS(schema.validate(), ConfigError);
  }
  SUBCASE("label must exist") {
    schema.label_column = "missing";
    CHECK_THROWS_AS(schema.validate(), ConfigError);
  }
  SUBCASE("discrete needs >= 2 categories") {
    schema.columns[1].categories = {"only"};
    CHECK_THROWS_AS(schema.validate(), ConfigError);
  }
  SUBCASE("duplicate category") {
    schema.columns[1].categories = {"a", "a"};
    CHECK_THROWS_AS(schema.validate(), ConfigError);
  }
}

TEST_CASE("schema file round-trip") {
  std::string text =
      "# comment\n"
      "column = speed continuous\n"
      "column = severity discrete nFI,FI\n"
      "label = severity\n"
      "label_kind = binary\n";
  DataSchema schema = parse_schema(text, "<test>");
  CHECK(schema.columns.size() == 2);
  CHECK(schema.columns[0].kind == ColumnKind::continuous);
  CHECK(schema.columns[1].categories == std::vector<std::string>{"nFI", "FI"});
  CHECK(parse_schema(format_schema(schema), "<round>").label_column == "severity");
}

TEST_CASE("load_csv parses a 3-row file") {
  auto schema = two_column_schema();
  Dataset data = parse_csv("speed,severity\n1.5,nFI\n2.5,FI\n3.5,nFI\n", schema, "<test>");
  CHECK(data.n_rows() == 3);
  CHECK(data.at(0, 0) == doctest::Approx(1.5));
  CHECK(data.at(1, 1) == 1.0);
  auto counts = data.class_counts();
  CHECK(counts[0] == 2);
  CHECK(counts[1] == 1);
}

TEST_CASE("load_csv accepts permuted headers") {
  auto schema = two_column_schema();
  Dataset data = parse_csv("severity,speed\nFI,9.25\n", schema, "<test>");
  CHECK(data.at(0, 0) == doctest::Approx(9.25));
  CHECK(data.at(0, 1) == 1.0);
}

TEST_CASE("load_csv error locations") {
  auto schema = two_column_schema();
  SUBCASE("unknown category") {
    CHECK_THROWS_WITH_AS(parse_csv("speed,severity\n1.0,Z\n", schema, "<t>"),
                         doctest::Contains("unknown category 'Z'"), DataError);
  }
  SUBCASE("unparseable value") {
    CHECK_THROWS_WITH_AS(parse_csv("speed,severity\nxx,FI\n", schema, "<t>"),
                         doctest::Contains("unparseable"), DataError);
  }
  SUBCASE("missing column") {
    CHECK_THROWS_WITH_AS(parse_csv("speed\n1.0\n", schema, "<t>"),
                         doctest::Contains("missing column 'severity'"), DataError);
  }
  SUBCASE("empty file") {
    CHECK_THROWS_AS(parse_csv("", schema, "<t>"), DataError);
  }
  SUBCASE("missing value") {
    CHECK_THROWS_WITH_AS(parse_csv("speed,severity\n1.0,\n", schema, "<t>"),
                         doctest::Contains("missing value"), DataError);
  }
}

TEST_CASE("csv emission uses 9 significant digits and exact category names") {
  auto schema = two_column_schema();
  Dataset data(schema);
  data.append_row(std::vector<double>{0.123456789123, 1});
  std::string text = format_csv(data);
  CHECK(text == "speed,severity\n0.123456789,FI\n");
  Dataset back = parse_csv(text, schema, "<round>");
  CHECK(back.at(0, 0) == doctest::Approx(0.123456789).epsilon(1e-12));
}

TEST_CASE("class counts at the recorded crash-data scale") {
  auto schema = two_column_schema();
  std::ostringstream csv;
  csv << "speed,severity\n";
  for (int i = 0; i < 157080; ++i) csv << (50 + i % 20) << ',' << (i < 81 ? "FI" : "nFI") << '\n';
  Dataset data = parse_csv(csv.str(), schema, "<big>");
  CHECK(data.n_rows() == 157080);
  auto counts = data.class_counts();
  CHECK(counts[0] == 156999);
  CHECK(counts[1] == 81);

  auto parts = split(data, 0.7, 7);
  CHECK(parts.train.n_rows() == 109956);
  CHECK(parts.test.n_rows() == 47124);
}

TEST_CASE("split determinism, disjointness, and rounding") {
  auto schema = two_column_schema();
  Rng rng(42);
  Dataset data = random_dataset(schema, 906, rng);
  auto a = split(data, 0.7, 3);
  auto b = split(data, 0.7, 3);
  CHECK(a.train.n_rows() == 634);
  CHECK(a.test.n_rows() == 272);
  CHECK(format_csv(a.train) == format_csv(b.train));
  CHECK(format_csv(a.test) == format_csv(b.test));

  auto c = split(data, 0.7, 4);
  CHECK(format_csv(a.train) != format_csv(c.train));

  SUBCASE("ten-row determinism") {
    Dataset small = random_dataset(schema, 10, rng);
    auto s1 = split(small, 0.5, 9);
    auto s2 = split(small, 0.5, 9);
    CHECK(format_csv(s1.train) == format_csv(s2.train));
    CHECK(s1.train.n_rows() == 5);
  }

  SUBCASE("bad fraction") {
    CHECK_THROWS_AS(split(data, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split(data, 1.0, 1), ConfigError);
  }
}

TEST_CASE("split partitions are exhaustive over random sizes") {
  auto schema = two_column_schema();
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto n = 2 + rng.uniform_int(200);
    Dataset data = random_dataset(schema, n, rng);
    double fraction = rng.uniform(0.1, 0.9);
    auto parts = split(data, fraction, rng.next_u64());
    CHECK(parts.train.n_rows() + parts.test.n_rows() == n);
    // Multiset equality through formatted rows.
    std::multiset<std::string> original, recombined;
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
      std::ostringstream row;
      for (double v : data.row(r)) row << v << ',';
      original.insert(row.str());
    }
    auto add = [&](const Dataset& d) {
      for (std::size_t r = 0; r < d.n_rows(); ++r) {
        std::ostringstream row;
        for (double v : d.row(r)) row << v << ',';
        recombined.insert(row.str());
      }
    };
    add(parts.train);
    add(parts.test);
    CHECK(original == recombined);
  }
}

TEST_CASE("encoded length law over random schemas") {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    DataSchema schema = random_schema(rng);
    Dataset data = random_dataset(schema, 60, rng);
    auto models = fit_mode_models(data, 4, 0.005, rng.next_u64());
    RowEncoder encoder(schema, models);

    long expected = 0;
    std::size_t next_model = 0;
    for (const auto& col : schema.columns) {
      if (col.kind == ColumnKind::continuous)
        expected += 1 + models[next_model++].n_modes();
      else
        expected += static_cast<long>(col.categories.size());
    }
    CHECK(encoder.layout().width == expected);

    Rng enc_rng(7);
    auto vec = encoder.encode(data.row(0), enc_rng);
    CHECK(vec.size() == expected);
  }
}

TEST_CASE("encode layout arithmetic matches the concatenation rule") {
  // Continuous modes (3, 2) and discrete sizes (4, 2): (1+3)+(1+2)+4+2 = 13.
  DataSchema schema;
  schema.columns = {{"a", ColumnKind::continuous, {}},
                    {"b", ColumnKind::continuous, {}},
                    {"d1", ColumnKind::discrete, {"p", "q", "r", "s"}},
                    {"d2", ColumnKind::discrete, {"u", "v"}}};
  schema.label_column = "d2";
  schema.label_kind = LabelKind::binary;

  std::vector<modenorm::ModeModel> models(2);
  models[0].modes = {{0.5, -1.0, 1.0}, {0.3, 0.0, 1.0}, {0.2, 1.0, 1.0}};
  models[1].modes = {{0.6, 0.0, 1.0}, {0.4, 5.0, 1.0}};
  RowEncoder encoder(schema, models);
  CHECK(encoder.layout().width == 13);
}

TEST_CASE("discrete-only schema one-hot identity") {
  DataSchema schema;
  schema.columns = {{"d", ColumnKind::discrete, {"a", "b", "c", "e"}}};
  schema.label_column = "d";
  schema.label_kind = LabelKind::ordered;
  RowEncoder encoder(schema, {});
  Rng rng(1);
  auto vec = encoder.encode(std::vector<double>{2.0}, rng);
  CHECK(vec.size() == 4);
  CHECK(vec[0] == 0.0);
  CHECK(vec[1] == 0.0);
  CHECK(vec[2] == 1.0);
  CHECK(vec[3] == 0.0);
}

TEST_CASE("single-mode encode puts alpha at (v - mean)/(4 std)") {
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}},
                    {"y", ColumnKind::discrete, {"0", "1"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  std::vector<modenorm::ModeModel> models(1);
  models[0].modes = {{1.0, 0.0, 1.0}};
  RowEncoder encoder(schema, models);
  Rng rng(5);
  auto vec = encoder.encode(std::vector<double>{2.0, 0.0}, rng);
  CHECK(vec[0] == doctest::Approx(0.5));  // (2-0)/(4*1)
  CHECK(vec[1] == 1.0);                   // single mode one-hot
}

TEST_CASE("decode: argmax rule and clipped alpha inverse") {
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}},
                    {"y", ColumnKind::discrete, {"0", "1"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  std::vector<modenorm::ModeModel> models(1);
  models[0].modes = {{0.5, 0.0, 1.0}, {0.5, 10.0, 2.0}};
  RowEncoder encoder(schema, models);

  // Soft mode block (generator-style): argmax selects mode 2.
  Eigen::VectorXd enc(5);
  enc << 1.0, 0.2, 0.8, 0.0, 1.0;
  auto row = encoder.decode(enc);
  CHECK(row[0] == doctest::Approx(10.0 + 4.0 * 2.0 * 1.0));
  CHECK(row[1] == 1.0);

  // One-mode model, alpha clipped at 1 decodes to mean + 4 std.
  std::vector<modenorm::ModeModel> one(1);
  one[0].modes = {{1.0, 0.0, 1.0}};
  RowEncoder enc1(schema, one);
  Eigen::VectorXd v(4);
  v << 1.0, 1.0, 1.0, 0.0;
  CHECK(enc1.decode(v)[0] == doctest::Approx(4.0));

  CHECK_THROWS_AS(enc1.decode(Eigen::VectorXd::Zero(3)), DataError);
}

TEST_CASE("round-trip decode(encode(r)) on random fixtures") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    DataSchema schema = random_schema(rng);
    Dataset data = random_dataset(schema, 50, rng);
    auto models = fit_mode_models(data, 5, 0.005, rng.next_u64());
    RowEncoder encoder(schema, models);

    Rng enc_rng(static_cast<std::uint64_t>(trial));
    for (std::size_t r = 0; r < 5; ++r) {
      auto original = data.row(r);
      auto encoded = encoder.encode(original, enc_rng);
      auto decoded = encoder.decode(encoded);
      std::size_t model_idx = 0;
      for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (schema.columns[c].kind == ColumnKind::discrete) {
          CHECK(decoded[c] == original[c]);
        } else {
          // Identity holds whenever alpha was not clipped.
          const auto& block = encoder.layout().continuous[model_idx];
          double alpha = encoded[block.alpha_offset];
          if (std::abs(alpha) < 1.0)
            CHECK(decoded[c] == doctest::Approx(original[c]).epsilon(1e-9));
          ++model_idx;
        }
      }
    }
  }
}

TEST_CASE("dataset validate flags bad cells") {
  auto schema = two_column_schema();
  Dataset data(schema);
  data.append_row(std::vector<double>{1.0, 1.0});
  CHECK_NOTHROW(data.validate());
  data.append_row(std::vector<double>{1.0, 5.0});
  CHECK_THROWS_WITH_AS(data.validate(), doctest::Contains("row 2"), DataError);
}
