#include "fppformer/data.hpp"
#include "test_util.hpp"

using namespace fppformer;
using namespace fpptest;

namespace {

Dataset ramp(std::size_t length, std::size_t vars) {
  Dataset ds;
  for (std::size_t v = 0; v < vars; ++v) {
    ds.names.push_back("v" + std::to_string(v));
    std::vector<double> col(length);
    for (std::size_t t = 0; t < length; ++t) col[t] = 1000.0 * v + static_cast<double>(t);
    ds.columns.push_back(col);
  }
  return ds;
}

std::string load_error(const std::filesystem::path& p) {
  try {
    load_csv(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadCsv, SmallFile) {
  auto dir = scratch_dir("csv_small");
  write_file(dir / "a.csv", "x,y\n1,2\n3,4\n5.5,-6e-1\n");
  Dataset ds = load_csv(dir / "a.csv");
  EXPECT_EQ(ds.length(), 3u);
  EXPECT_EQ(ds.n_vars(), 2u);
  EXPECT_EQ(ds.names, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(ds.columns[0], (std::vector<double>{1, 3, 5.5}));
  EXPECT_EQ(ds.columns[1], (std::vector<double>{2, 4, -0.6}));
  EXPECT_TRUE(ds.dates.empty());
}

TEST(LoadCsv, DateColumnIsKeptAside) {
  auto dir = scratch_dir("csv_ett");
  std::string text = "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
  for (int h = 0; h < 5; ++h)
    text += "2016-07-01 0" + std::to_string(h) + ":00:00,5.8,2.0,1.4,0.4,4.2,1.3,30.5\n";
  write_file(dir / "ett.csv", text);
  Dataset ds = load_csv(dir / "ett.csv");
  EXPECT_EQ(ds.n_vars(), 7u);
  EXPECT_EQ(ds.length(), 5u);
  EXPECT_EQ(ds.names.back(), "OT");
  ASSERT_EQ(ds.dates.size(), 5u);
  EXPECT_EQ(ds.dates[2], "2016-07-01 02:00:00");
}

TEST(LoadCsv, NanCellNamesRowAndColumn) {
  auto dir = scratch_dir("csv_nan");
  write_file(dir / "n.csv", "a,b\n1,2\n3,NaN\n");
  const std::string msg = load_error(dir / "n.csv");
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
}

TEST(LoadCsv, MalformedFilesAreRejected) {
  auto dir = scratch_dir("csv_bad");
  write_file(dir / "empty.csv", "");
  EXPECT_NE(load_error(dir / "empty.csv").find("empty"), std::string::npos);
  write_file(dir / "header.csv", "a,b\n");
  EXPECT_NE(load_error(dir / "header.csv").find("no data rows"), std::string::npos);
  write_file(dir / "ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_NE(load_error(dir / "ragged.csv").find("row 2"), std::string::npos);
  write_file(dir / "text.csv", "a\n1\nabc\n");
  EXPECT_NE(load_error(dir / "text.csv").find("'abc'"), std::string::npos);
  write_file(dir / "inf.csv", "a\ninf\n");
  EXPECT_FALSE(load_error(dir / "inf.csv").empty());
  EXPECT_THROW(load_csv(dir / "missing.csv"), DataError);
}

TEST(LoadCsv, WriteReadRoundTripIsExact) {
  auto dir = scratch_dir("csv_roundtrip");
  Rng rng(1);
  Dataset ds;
  ds.names = {"a", "b"};
  ds.columns = {random_values(50, rng, 1e3), random_values(50, rng, 1e-3)};
  write_csv(ds, dir / "r.csv");
  Dataset back = load_csv(dir / "r.csv");
  EXPECT_EQ(back.names, ds.names);
  EXPECT_EQ(back.columns, ds.columns);
}

TEST(Revin, HandExample) {
  auto r = revin_normalize(std::vector<double>{1, 2, 3});
  EXPECT_DOUBLE_EQ(r.mean, 2.0);
  EXPECT_NEAR(r.std, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(r.values[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(r.values[1], 0.0, 1e-15);
  EXPECT_NEAR(r.values[2], 1.224744871391589, 1e-12);
}

TEST(Revin, ConstantWindowClampsStd) {
  auto r = revin_normalize(std::vector<double>(8, 4.5));
  EXPECT_EQ(r.std, kRevinEps);
  for (double v : r.values) EXPECT_EQ(v, 0.0);
}

TEST(Revin, Denormalize) {
  EXPECT_EQ(revin_denormalize(std::vector<double>(3, 0.0), 7.0, 2.0),
            (std::vector<double>{7, 7, 7}));
  std::vector<double> x{1.5, -2.0, 0.25};
  EXPECT_EQ(revin_denormalize(x, 0.0, 1.0), x);
}

TEST(Revin, RoundTripAndMoments) {
  Rng rng(2);
  std::uniform_real_distribution<double> loc(-100, 100), sc(1e-2, 50);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_values(10 + trial % 50, rng, sc(rng));
    for (auto& v : x) v += loc(rng);
    auto r = revin_normalize(x);
    auto back = revin_denormalize(r.values, r.mean, r.std);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-9);
    double m = 0.0, s = 0.0;
    for (double v : r.values) m += v;
    m /= static_cast<double>(x.size());
    for (double v : r.values) s += (v - m) * (v - m);
    s = std::sqrt(s / static_cast<double>(x.size()));
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Splits, FractionsAreValidated) {
  EXPECT_THROW((SplitSpec{0.5, 0.5, 0.0}.validate()), ConfigError);
  EXPECT_THROW((SplitSpec{0.5, 0.3, 0.3}.validate()), ConfigError);
  EXPECT_NO_THROW((SplitSpec{0.7, 0.1, 0.2}.validate()));
}

TEST(Splits, RangesAreChronologicalAndCover) {
  for (std::size_t t : {10u, 200u, 5000u, 17419u}) {
    auto r = split_ranges(t, {});
    EXPECT_EQ(r[0].begin, 0u);
    EXPECT_EQ(r[0].end, r[1].begin);
    EXPECT_EQ(r[1].end, r[2].begin);
    EXPECT_EQ(r[2].end, t);
  }
  auto r = split_ranges(5000, {});
  EXPECT_EQ(r[0].end, 3500u);
  EXPECT_EQ(r[1].end, 4000u);
}

TEST(Windows, CountingExample) {
  // T=200 with 96% train covers 192 rows: one position, two variables.
  Dataset ds = ramp(200, 2);
  SplitSpec spec{0.96, 0.02, 0.02};
  auto w = sliding_windows(ds, 96, 96, spec, Split::Train);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].variable, 0u);
  EXPECT_EQ(w[1].variable, 1u);
  EXPECT_EQ(w[0].start, 0u);
  EXPECT_EQ(window_count(192, 96, 96, 1), 1u);
  EXPECT_EQ(window_count(191, 96, 96, 1), 0u);
}

TEST(Windows, CountMatchesBruteForce) {
  for (std::size_t rows : {10u, 37u, 100u})
    for (std::size_t stride : {1u, 3u, 8u}) {
      std::size_t n = 0;
      for (std::size_t s = 0; s + 4 + 3 <= rows; s += stride) ++n;
      EXPECT_EQ(window_count(rows, 4, 3, stride), n);
    }
}

TEST(Windows, AlignmentAndNormalization) {
  Dataset ds = ramp(300, 3);
  SplitSpec spec;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (const auto& w : sliding_windows(ds, 12, 6, spec, s, 5)) {
      const auto& col = ds.columns[w.variable];
      ASSERT_EQ(w.input.size(), 12u);
      ASSERT_EQ(w.target.size(), 6u);
      EXPECT_EQ(w.target[0], col[w.start + 12]);
      EXPECT_EQ(w.input[0], col[w.start]);
      EXPECT_EQ(w.input.back() + 1.0, w.target[0]);
      auto r = revin_normalize(w.input);
      EXPECT_EQ(w.normalized_input, r.values);
      EXPECT_EQ(w.revin_mean, r.mean);
      EXPECT_EQ(w.revin_std, r.std);
      for (std::size_t i = 0; i < 6; ++i)
        EXPECT_NEAR(w.normalized_target[i] * w.revin_std + w.revin_mean, w.target[i], 1e-9);
    }
  }
}

TEST(Windows, OrderedByStartThenVariable) {
  Dataset ds = ramp(100, 3);
  auto w = sliding_windows(ds, 8, 4, {}, Split::Train);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].variable, i % 3);
    EXPECT_EQ(w[i].start, i / 3);
  }
}

TEST(Windows, StrideOfHorizonGivesDisjointTargets) {
  Dataset ds = ramp(500, 1);
  auto w = sliding_windows(ds, 24, 12, {}, Split::Test, 12);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_EQ(w[i].start, w[i - 1].start + 12);
}

TEST(Windows, UnivariateCountEqualsPositions) {
  Dataset ds = ramp(400, 1);
  auto r = split_ranges(400, {});
  auto w = sliding_windows(ds, 16, 8, {}, Split::Train);
  EXPECT_EQ(w.size(), window_count(r[0].end - r[0].begin, 16, 8, 1));
}

TEST(Windows, SplitsAreDisjoint) {
  Dataset ds = ramp(1000, 2);
  auto ranges = split_ranges(1000, {});
  for (int s = 0; s < 3; ++s) {
    for (const auto& w : sliding_windows(ds, 24, 24, {}, static_cast<Split>(s))) {
      EXPECT_GE(w.start, ranges[s].begin);
      EXPECT_LE(w.start + 48, ranges[s].end);
    }
  }
}

TEST(Windows, ShortSegmentErrorNamesIt) {
  Dataset ds = ramp(200, 1);
  try {
    sliding_windows(ds, 24, 24, {}, Split::Val);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("val segment has 20 rows"), std::string::npos)
        << e.what();
  }
}
