#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rebal/resampling.hpp"
#include "testutil.hpp"

using namespace rebal;
using namespace rebal::resampling;

namespace {

// Label-only dataset with the given class counts.
Dataset label_only(const std::vector<long>& counts) {
  DataSchema schema;
  Column label{"severity", ColumnKind::discrete, {}};
  for (std::size_t c = 0; c < counts.size(); ++c) label.categories.push_back("c" + std::to_string(c));
  if (counts.size() == 2) label.categories = {"nFI", "FI"};
  schema.columns = {{"x", ColumnKind::continuous, {}}, label};
  schema.label_column = "severity";
  schema.label_kind = counts.size() == 2 ? LabelKind::binary : LabelKind::ordered;

  Dataset data(schema);
  Rng rng(1);
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (long i = 0; i < counts[c]; ++i)
      data.append_row(std::vector<double>{rng.normal(), static_cast<double>(c)});
  return data;
}

std::multiset<std::string> row_multiset(const Dataset& data) {
  std::multiset<std::string> out;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    std::string key;
    for (double v : data.row(r)) key += std::to_string(v) + ",";
    out.insert(key);
  }
  return out;
}

ctgan::CtganConfig fast_ctgan(std::uint64_t seed) {
  ctgan::CtganConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 50;
  cfg.pac = 10;
  cfg.z_dim = 16;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("random undersampling hits the recorded designs exactly") {
  SUBCASE("109,899 / 57 to 57 / 57") {
    Dataset data = label_only({109899, 57});
    auto out = random_undersample(data, {{0, 57}}, 5);
    auto counts = out.class_counts();
    CHECK(counts[0] == 57);
    CHECK(counts[1] == 57);
  }
  SUBCASE("317 / 63 to 63 / 63") {
    Dataset data = label_only({317, 63});
    auto out = random_undersample(data, {{0, 63}}, 5);
    auto counts = out.class_counts();
    CHECK(counts[0] == 63);
    CHECK(counts[1] == 63);
  }
}

TEST_CASE("undersampling identity, inclusion, and determinism") {
  Dataset data = label_only({50, 20});

  SUBCASE("target equal to current count copies the input") {
    auto out = random_undersample(data, {{0, 50}, {1, 20}}, 9);
    CHECK(format_csv(out) == format_csv(data));
  }
  SUBCASE("output is a sub-multiset of the input") {
    auto out = random_undersample(data, {{0, 13}}, 9);
    CHECK(out.class_counts()[0] == 13);
    auto all = row_multiset(data);
    for (const auto& key : row_multiset(out)) {
      auto it = all.find(key);
      REQUIRE(it != all.end());
      all.erase(it);
    }
  }
  SUBCASE("seed determinism") {
    auto a = random_undersample(data, {{0, 10}}, 4);
    auto b = random_undersample(data, {{0, 10}}, 4);
    auto c = random_undersample(data, {{0, 10}}, 5);
    CHECK(format_csv(a) == format_csv(b));
    CHECK(format_csv(a) != format_csv(c));
  }
  SUBCASE("infeasible target") {
    CHECK_THROWS_AS(random_undersample(data, {{1, 21}}, 1), ConfigError);
  }
}

TEST_CASE("smote_nc keeps counts and validity at the recorded scale") {
  Dataset data = label_only({220, 57});
  auto out = smote_nc(data, 1, 5, 109842, 77);
  auto counts = out.class_counts();
  CHECK(counts[0] == 220);
  CHECK(counts[1] == 109899);
  CHECK_NOTHROW(out.validate());
  // Originals are untouched, in order.
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    CHECK(std::equal(data.row(r).begin(), data.row(r).end(), out.row(r).begin()));
}

TEST_CASE("smote_nc with zero synthetic rows is the identity") {
  Dataset data = label_only({30, 12});
  auto out = smote_nc(data, 1, 3, 0, 5);
  CHECK(format_csv(out) == format_csv(data));
}

TEST_CASE("smote_nc preconditions") {
  Dataset data = label_only({30, 5});
  CHECK_THROWS_AS(smote_nc(data, 1, 5, 10, 1), ConfigError);  // minority <= k

  DataSchema discrete_only;
  discrete_only.columns = {{"d", ColumnKind::discrete, {"a", "b"}},
                           {"y", ColumnKind::discrete, {"0", "1"}}};
  discrete_only.label_column = "y";
  discrete_only.label_kind = LabelKind::binary;
  Dataset no_cont(discrete_only);
  for (int i = 0; i < 40; ++i)
    no_cont.append_row(std::vector<double>{static_cast<double>(i % 2),
                                           static_cast<double>(i % 2)});
  CHECK_THROWS_AS(smote_nc(no_cont, 1, 3, 5, 1), ConfigError);
}

TEST_CASE("smote_nc synthetic rows interpolate minority segments") {
  // Five collinear minority points; every synthetic value must lie on a
  // segment between a seed point and one of its k nearest neighbours.
  DataSchema schema;
  schema.columns = {{"x", ColumnKind::continuous, {}},
                    {"flag", ColumnKind::discrete, {"a", "b"}},
                    {"y", ColumnKind::discrete, {"maj", "min"}}};
  schema.label_column = "y";
  schema.label_kind = LabelKind::binary;
  Dataset data(schema);
  std::vector<double> xs{0.0, 1.0, 2.0, 3.0, 4.0};
  for (double x : xs) data.append_row(std::vector<double>{x, x >= 2.0 ? 1.0 : 0.0, 1.0});
  Rng noise(3);
  for (int i = 0; i < 40; ++i)
    data.append_row(std::vector<double>{noise.uniform(-10.0, 10.0), 0.0, 0.0});

  const int k = 3;
  auto out = smote_nc(data, 1, k, 400, 11);
  REQUIRE(out.n_rows() == data.n_rows() + 400);

  // Brute-force oracle: neighbour sets by exhaustive distance enumeration in
  // the same standardized metric, then segment membership and majority vote.
  auto minority_std = [&] {
    std::vector<double> vals(xs.begin(), xs.end());
    return std::sqrt(variance_of(vals));
  }();
  std::vector<std::set<double>> neighbor_values(xs.size());
  std::vector<int> vote(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i == j) continue;
      double dc = (xs[i] - xs[j]) / minority_std;
      double mismatch = (xs[i] >= 2.0) != (xs[j] >= 2.0) ? 1.0 : 0.0;
      d.emplace_back(dc * dc + mismatch, j);
    }
    std::sort(d.begin(), d.end());
    int ones = 0;
    for (int t = 0; t < k; ++t) {
      neighbor_values[i].insert(xs[d[static_cast<std::size_t>(t)].second]);
      ones += xs[d[static_cast<std::size_t>(t)].second] >= 2.0;
    }
    vote[i] = ones > k - ones ? 1 : 0;  // ties break to the lowest index
  }

  for (std::size_t r = data.n_rows(); r < out.n_rows(); ++r) {
    double x = out.at(r, 0);
    double flag = out.at(r, 1);
    CHECK(out.at(r, 2) == 1.0);
    bool on_some_segment = false;
    bool vote_matches = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (double nb : neighbor_values[i]) {
        double lo = std::min(xs[i], nb), hi = std::max(xs[i], nb);
        if (x >= lo - 1e-12 && x <= hi + 1e-12) {
          on_some_segment = true;
          if (flag == vote[i]) vote_matches = true;
        }
      }
    }
    CHECK(on_some_segment);
    CHECK(vote_matches);
    CHECK(x >= 0.0);
    CHECK(x <= 4.0);  // convex hull of the minority values
  }
}

TEST_CASE("ctgan oversampling appends only minority-labelled rows") {
  Dataset data = testutil::toy_dataset(220, 13);
  // Rebalance label classes to 200/20 first so there is a clear minority.
  std::map<int, long> shrink{{0, 100}, {1, 20}};
  Dataset base = random_undersample(data, shrink, 3);

  SUBCASE("target equal to current count returns the input") {
    auto out = ctgan_oversample(base, 1, 20, fast_ctgan(5));
    CHECK(format_csv(out) == format_csv(base));
  }
  SUBCASE("toy expansion reaches the target with minority labels") {
    auto out = ctgan_oversample(base, 1, 100, fast_ctgan(5));
    auto counts = out.class_counts();
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    CHECK_NOTHROW(out.validate());
    for (std::size_t r = base.n_rows(); r < out.n_rows(); ++r) CHECK(out.label_of(r) == 1);
    // Original rows intact.
    for (std::size_t r = 0; r < base.n_rows(); ++r)
      CHECK(std::equal(base.row(r).begin(), base.row(r).end(), out.row(r).begin()));
  }
  SUBCASE("target below current count is rejected") {
    CHECK_THROWS_AS(ctgan_oversample(base, 1, 10, fast_ctgan(5)), ConfigError);
  }
}

TEST_CASE("ctgan_ru hits the mixed-sampling designs exactly") {
  SUBCASE("2:1 undersample then balance at 114") {
    Dataset data = testutil::toy_dataset(1200, 17);
    std::map<int, long> imbalance{{1, 57}};
    Dataset pool = random_undersample(data, imbalance, 21);  // majority kept, minority 57

    auto out = ctgan_ru(pool, {{0, 114}}, {{0, 114}, {1, 114}}, fast_ctgan(23));
    auto counts = out.class_counts();
    CHECK(counts[0] == 114);
    CHECK(counts[1] == 114);
    CHECK_NOTHROW(out.validate());
  }
  SUBCASE("Experiment-1-style three-class plan: 317/63/63 to 126 each") {
    DataSchema schema;
    schema.columns = {{"x", ColumnKind::continuous, {}},
                      {"y", ColumnKind::discrete, {"0", "1", "2"}}};
    schema.label_column = "y";
    schema.label_kind = LabelKind::ordered;
    Dataset data(schema);
    Rng rng(31);
    auto add_rows = [&](int cls, long n, double center) {
      for (long i = 0; i < n; ++i)
        data.append_row(std::vector<double>{rng.normal(center, 1.0), static_cast<double>(cls)});
    };
    add_rows(0, 317, -2.0);
    add_rows(1, 63, 0.0);
    add_rows(2, 63, 2.0);

    auto out = ctgan_ru(data, {{0, 126}}, {{0, 126}, {1, 126}, {2, 126}}, fast_ctgan(37));
    auto counts = out.class_counts();
    CHECK(counts[0] == 126);
    CHECK(counts[1] == 126);
    CHECK(counts[2] == 126);
    CHECK_NOTHROW(out.validate());
  }
  SUBCASE("infeasible final target is rejected") {
    Dataset data = label_only({40, 10});
    CHECK_THROWS_AS(ctgan_ru(data, {{0, 20}}, {{0, 20}, {1, 5}}, fast_ctgan(1)), ConfigError);
  }
}

TEST_CASE("plan dispatch covers the four methods") {
  Dataset data = testutil::toy_dataset(300, 41);
  auto counts = data.class_counts();
  long minority = std::min(counts[0], counts[1]);
  int min_class = counts[0] < counts[1] ? 0 : 1;
  int maj_class = 1 - min_class;

  ResamplePlan plan;
  plan.seed = 4;

  SUBCASE("ru") {
    plan.method = Method::ru;
    plan.targets = {{maj_class, minority}};
    auto out = apply(data, plan);
    CHECK(out.class_counts()[static_cast<std::size_t>(maj_class)] == minority);
  }
  SUBCASE("smote_nc") {
    plan.method = Method::smote_nc;
    plan.minority_class = min_class;
    plan.targets = {{min_class, minority + 40}};
    auto out = apply(data, plan);
    CHECK(out.class_counts()[static_cast<std::size_t>(min_class)] == minority + 40);
  }
  SUBCASE("ctgan") {
    plan.method = Method::ctgan;
    plan.minority_class = min_class;
    plan.targets = {{min_class, minority + 15}};
    plan.ctgan_config = fast_ctgan(0);
    auto out = apply(data, plan);
    CHECK(out.class_counts()[static_cast<std::size_t>(min_class)] == minority + 15);
  }
  SUBCASE("ctgan_ru") {
    plan.method = Method::ctgan_ru;
    plan.ru_targets = {{maj_class, minority}};
    plan.targets = {{maj_class, minority}, {min_class, minority + 20}};
    plan.ctgan_config = fast_ctgan(0);
    auto out = apply(data, plan);
    CHECK(out.class_counts()[static_cast<std::size_t>(maj_class)] == minority);
    CHECK(out.class_counts()[static_cast<std::size_t>(min_class)] == minority + 20);
  }
  SUBCASE("invalid targets rejected") {
    plan.method = Method::ru;
    plan.targets = {{0, 0}};
    CHECK_THROWS_AS(apply(data, plan), ConfigError);
    plan.targets = {{7, 3}};
    CHECK_THROWS_AS(apply(data, plan), ConfigError);
  }
}

TEST_CASE("resamplers preserve the schema and never mutate surviving rows") {
  Dataset data = testutil::toy_dataset(200, 47);
  ResamplePlan plan;
  plan.method = Method::ru;
  plan.seed = 8;
  auto counts = data.class_counts();
  plan.targets = {{0, counts[0] / 2}};
  auto out = apply(data, plan);
  CHECK(out.schema().columns.size() == data.schema().columns.size());
  auto all = row_multiset(data);
  for (const auto& key : row_multiset(out)) CHECK(all.count(key) > 0);
}
