#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tlinfer/data/csv.hpp"
#include "tlinfer/data/generators.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/text.hpp"

using namespace tlinfer;

namespace {

data::Dataset parse_text(const std::string& text) {
  std::istringstream in(text);
  return data::parse_csv(in);
}

std::string csv_error(const std::string& text) {
  try {
    parse_text(text);
  } catch (const data::CsvError& e) {
    return e.what();
  }
  return "";
}

double mcr(const stl::Formula& f, const data::Dataset& ds) {
  std::size_t wrong = 0;
  for (const auto& tr : ds.traces) wrong += stl::sign_of(stl::final_robustness(f, tr)) != stl::sign_of(tr.label());
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

double trace_max(const stl::Trace& tr) { return *std::max_element(tr.values().begin(), tr.values().end()); }

}  // namespace

TEST(Csv, TwoLabeledTraces) {
  const auto ds = parse_text("trace_id,time,x0,label\na,0,1.5,1\na,1,2.5,1\nb,0,-1,-1\nb,1,-2,-1\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.label_kind, data::LabelKind::Binary);
  EXPECT_EQ(ds.traces[0].values(), (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(ds.traces[1].label(), -1.0);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"x0"}));
}

TEST(Csv, RowsAreSortedByTimeAndGroupedById) {
  const auto ds = parse_text("trace_id,time,v,w,label\nb,1,3,30,0.5\na,0,9,90,-1\nb,0,1,10,0.5\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.traces[0].id(), "b");
  EXPECT_EQ(ds.traces[0].values(), (std::vector<double>{1, 10, 3, 30}));
  EXPECT_EQ(ds.label_kind, data::LabelKind::Continuous);
  EXPECT_EQ(ds.dim(), 2u);
}

TEST(Csv, MissingLabelColumn) {
  EXPECT_NE(csv_error("trace_id,time,x0,x1\na,0,1,2\n").find("missing label column"), std::string::npos);
}

TEST(Csv, NonUniformTimesNameTheTrace) {
  EXPECT_NE(csv_error("trace_id,time,x0,label\nok,0,1,1\nok,1,1,1\nbad,0,1,1\nbad,1,1,1\nbad,3,1,1\n")
                .find("trace 'bad'"),
            std::string::npos);
}

TEST(Csv, LabelChangeRaggedRowsAndEmptyInput) {
  EXPECT_NE(csv_error("trace_id,time,x0,label\na,0,1,1\na,1,1,-1\n").find("label changes"), std::string::npos);
  EXPECT_NE(csv_error("trace_id,time,x0,label\na,0,1\n").find("line 2"), std::string::npos);
  EXPECT_NE(csv_error("").find("empty"), std::string::npos);
  EXPECT_NE(csv_error("trace_id,time,x0,label\n").find("no data rows"), std::string::npos);
  EXPECT_NE(csv_error("trace_id,time,x0,label\na,0,abc,1\n").find("invalid value"), std::string::npos);
}

TEST(Csv, TextRoundTrip) {
  const std::string text = "trace_id,time,v,label\nc0,0,25.5,1\nc0,1,26.25,1\nc1,0,30,-1\nc1,1,41.125,-1\n";
  EXPECT_EQ(data::to_csv(parse_text(text)), text);
}

TEST(CsvProperty, GeneratedDatasetsRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto ds = data::gen_cct({20, 15}, seed);
    const std::string text = data::to_csv(ds);
    auto back = parse_text(text);
    EXPECT_EQ(data::to_csv(back), text);
    back.provenance = ds.provenance;
    EXPECT_EQ(back, ds);
  }
}

TEST(Csv, FileRoundTrip) {
  const auto dir = testkit::temp_dir("csv");
  const auto ds = data::gen_interval(10, 3);
  data::save_csv(ds, (dir / "i.csv").string());
  auto back = data::load_csv((dir / "i.csv").string());
  back.provenance = ds.provenance;
  EXPECT_EQ(back, ds);
  EXPECT_THROW(data::load_csv((dir / "missing.csv").string()), data::CsvError);
}

TEST(Dataset, ValidateRejectsDuplicatesAndMixedLabels) {
  data::Dataset ds;
  ds.feature_names = {"x0"};
  ds.traces = {stl::Trace::scalar({1.0}, 1.0, "a"), stl::Trace::scalar({1.0}, -1.0, "a")};
  EXPECT_THROW(ds.validate(), std::invalid_argument);
  ds.traces[1] = stl::Trace::scalar({1.0}, 0.5, "b");
  EXPECT_THROW(ds.validate(), std::invalid_argument);
  ds.label_kind = data::LabelKind::Continuous;
  EXPECT_NO_THROW(ds.validate());
}

TEST(StepThreshold, BalancedAndSeparable) {
  const auto ds = data::gen_step_threshold({}, 1);
  ASSERT_EQ(ds.size(), 100u);
  std::size_t pos = 0;
  double pos_min = 1e9, neg_max = -1e9;
  for (const auto& tr : ds.traces) {
    EXPECT_EQ(tr.length(), 20u);
    const auto [lo, hi] = std::minmax_element(tr.values().begin(), tr.values().end());
    if (tr.label() > 0) {
      ++pos;
      pos_min = std::min(pos_min, *lo);
    } else {
      neg_max = std::max(neg_max, *hi);
    }
  }
  EXPECT_EQ(pos, 50u);
  EXPECT_LT(neg_max, pos_min);
  // Best single threshold: any cut between the class ranges classifies all.
  EXPECT_EQ(mcr(stl::hist(stl::ge(0, 0.5 * (neg_max + pos_min))), ds), 0.0);
  EXPECT_EQ(mcr(stl::hist(stl::ge(0, 0.0)), ds), 0.0);
}

TEST(StepThreshold, RejectsOddCountsAndShortTraces) {
  EXPECT_THROW(data::gen_step_threshold({3, 20}, 1), std::invalid_argument);
  EXPECT_THROW(data::gen_step_threshold({4, 1}, 1), std::invalid_argument);
}

TEST(Cct, ClassRanges) {
  const auto ds = data::gen_cct({200, 100}, 7);
  std::size_t pos = 0;
  for (const auto& tr : ds.traces) {
    if (tr.label() > 0) {
      ++pos;
      EXPECT_LE(trace_max(tr), data::kCruiseSpeed + data::kCruiseBand);
      EXPECT_GE(*std::min_element(tr.values().begin(), tr.values().end()), data::kCruiseSpeed - data::kCruiseBand);
    } else {
      EXPECT_GT(trace_max(tr), 34.0);
    }
  }
  EXPECT_EQ(pos, 100u);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"v"}));
  EXPECT_LE(mcr(stl::hist(stl::le(0, 34.3)), ds), 0.05);
}

TEST(Interval, ClassPropertiesPerStepRange) {
  const auto ds = data::gen_interval(200, 1);
  std::size_t pos = 0;
  for (const auto& tr : ds.traces) {
    ASSERT_EQ(tr.length(), 7u);
    for (std::size_t t = 0; t < 7; ++t) {
      const double x = tr.at(t, 0);
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      if (t >= 1 && t <= 5 && (tr.label() < 0 || t >= 3)) {
        EXPECT_LT(x, 0.5);
      }
      if (tr.label() > 0 && (t == 1 || t == 2)) {
        EXPECT_GE(x, 0.5);
      }
    }
    pos += tr.label() > 0;
  }
  EXPECT_EQ(pos, 100u);
  // Future-time G[1,2] (x0 >= 0.42) at step 0, as a past-time formula on reversed traces.
  EXPECT_LE(mcr(stl::hist(stl::ge(0, 0.42), stl::IntervalMask::range(1, 2)), data::reverse(ds)), 0.10);
}

TEST(Generators, SameSeedSameBytes) {
  EXPECT_EQ(data::to_csv(data::gen_step_threshold({}, 9)), data::to_csv(data::gen_step_threshold({}, 9)));
  EXPECT_EQ(data::gen_cct({40, 30}, 9), data::gen_cct({40, 30}, 9));
  EXPECT_EQ(data::gen_interval(40, 9), data::gen_interval(40, 9));
  EXPECT_NE(data::gen_interval(40, 9), data::gen_interval(40, 10));
}

TEST(LabelContinuous, RobustnessOfHistoricallyBound) {
  data::Dataset ds;
  ds.feature_names = {"v"};
  ds.traces = {stl::Trace::scalar({25, 30, 28}, 1, "a"), stl::Trace::scalar({25, 40, 28}, -1, "b")};
  const auto f = stl::parse("G (v <= 34.3)", {{"v"}, 1});
  const auto out = data::label_continuous(ds, f);
  EXPECT_EQ(out.label_kind, data::LabelKind::Continuous);
  EXPECT_NEAR(out.traces[0].label(), 4.3, 1e-12);
  EXPECT_NEAR(out.traces[1].label(), -5.7, 1e-12);
  EXPECT_EQ(data::label_continuous(out, f), out);
}

TEST(LabelContinuous, DimensionMismatchThrows) {
  const auto ds = data::gen_interval(4, 1);
  EXPECT_THROW(data::label_continuous(ds, stl::ge(1, 0.0, 2)), std::invalid_argument);
}

TEST(Reverse, ReversesRowsAndIsAnInvolution) {
  data::Dataset ds;
  ds.feature_names = {"x0"};
  ds.traces = {stl::Trace::scalar({1, 2, 3}, 1, "a")};
  EXPECT_EQ(data::reverse(ds).traces[0].values(), (std::vector<double>{3, 2, 1}));
  const auto cct = data::gen_cct({10, 12}, 4);
  EXPECT_EQ(data::reverse(data::reverse(cct)), cct);
  const stl::Trace multi("m", 2, {1, 10, 2, 20, 3, 30});
  EXPECT_EQ(multi.reversed().values(), (std::vector<double>{3, 30, 2, 20, 1, 10}));
}

TEST(Reverse, PastTimeOnReversedEqualsFutureTimeAtStart) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto tr = testkit::random_trace(rng, 1, 3 + rng() % 8);
    const std::size_t a = rng() % 3, b = a + rng() % 3;
    const auto atom = stl::ge(0, 0.1);
    // Future-time F[a,b] / G[a,b] at step 0, brute force over the original.
    double fut_max = -1e6, fut_min = 1e6;
    for (std::size_t t = a; t <= b && t < tr.length(); ++t) {
      fut_max = std::max(fut_max, tr.at(t, 0) - 0.1);
      fut_min = std::min(fut_min, tr.at(t, 0) - 0.1);
    }
    const auto mask = stl::IntervalMask::range(a, b);
    EXPECT_DOUBLE_EQ(stl::final_robustness(stl::once(atom, mask), tr.reversed()), fut_max);
    EXPECT_DOUBLE_EQ(stl::final_robustness(stl::hist(atom, mask), tr.reversed()), fut_min);
  }
}

TEST(Split, DeterministicPartition) {
  const auto ds = data::gen_step_threshold({}, 2);
  const auto a = data::split(ds, 0.8, 11);
  const auto b = data::split(ds, 0.8, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.train.size(), 80u);
  EXPECT_EQ(a.test.size(), 20u);
  std::set<std::string> ids;
  for (const auto& tr : a.train.traces) ids.insert(tr.id());
  for (const auto& tr : a.test.traces) ids.insert(tr.id());
  EXPECT_EQ(ids.size(), 100u);
  EXPECT_NE(data::split(ds, 0.8, 12).train, a.train);
  EXPECT_THROW(data::split(ds, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(data::split(ds, 0.0, 1), std::invalid_argument);
}
