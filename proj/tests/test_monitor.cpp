#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "tlinfer/stl/monitor.hpp"

using namespace tlinfer;
using testkit::FormulaGen;

namespace {

void expect_near_all(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at step " << i;
}

// Traces whose atom x0 >= 0 reproduces a prescribed robustness signal.
stl::Trace identity_trace(std::vector<double> rho) { return stl::Trace::scalar(std::move(rho)); }

}  // namespace

TEST(Robustness, HistoricallyBelowBound) {
  const auto f = stl::hist(stl::le(0, 0.5));
  const auto tr = stl::Trace::scalar({0.2, 0.4, 0.3});
  expect_near_all(stl::robustness(f, tr), {0.3, 0.1, 0.1}, 1e-12);
  expect_near_all(stl::robustness_recurrent(f, tr), {0.3, 0.1, 0.1}, 1e-12);
}

TEST(Robustness, NegationIsPointwise) {
  const auto tr = stl::Trace::scalar({0.2, -0.4, 0.3});
  const auto phi = stl::once(stl::ge(0, 0.1));
  const auto a = stl::robustness(phi, tr);
  const auto b = stl::robustness(stl::negate(phi), tr);
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(b[t], -a[t]);
}

TEST(Robustness, SinceOnPrescribedSignals) {
  // p = x0 >= 0, q = x1 >= 0 with rho_p = [1,1,-1], rho_q = [-1,1,-1].
  const stl::Trace tr("pq", 2, {1, -1, 1, 1, -1, -1});
  const auto f = stl::since(stl::ge(0, 0.0, 2), stl::ge(1, 0.0, 2));
  expect_near_all(stl::robustness(f, tr), {-1, 1, -1}, 0.0);
  expect_near_all(stl::robustness_recurrent(f, tr), {-1, 1, -1}, 0.0);
}

TEST(Robustness, ConstantOnceIsConstant) {
  const auto f = stl::once(stl::ge(0, 0.0));
  expect_near_all(stl::robustness_recurrent(f, stl::Trace::scalar({0.5, 0.5, 0.5, 0.5})), {0.5, 0.5, 0.5, 0.5},
                  0.0);
}

TEST(Robustness, EmptyBoundedWindowsUseHorizon) {
  const auto tr = identity_trace({0.3, 0.7, 0.1});
  const auto mask = stl::IntervalMask::range(2, 3);
  stl::MonitorOptions opts;
  opts.horizon = 50.0;
  const auto once = stl::robustness(stl::once(stl::ge(0, 0.0), mask), tr, opts);
  EXPECT_EQ(once[0], -50.0);
  EXPECT_EQ(once[1], -50.0);
  EXPECT_EQ(once[2], 0.3);
  const auto hist = stl::robustness(stl::hist(stl::ge(0, 0.0), mask), tr, opts);
  EXPECT_EQ(hist[1], 50.0);
  EXPECT_EQ(hist[2], 0.3);
  const auto since = stl::robustness(stl::since(stl::ge(0, 0.0), stl::ge(0, 0.0), mask), tr, opts);
  EXPECT_EQ(since[0], -50.0);
}

TEST(Robustness, MaskWithHoles) {
  const auto tr = identity_trace({5, 1, 2, 3, 4});
  const auto f = stl::once(stl::ge(0, 0.0), stl::IntervalMask::steps({0, 4}));
  expect_near_all(stl::robustness(f, tr), {5, 1, 2, 3, 5}, 0.0);
}

TEST(Robustness, DimensionMismatchThrows) {
  EXPECT_THROW(stl::robustness(stl::ge(1, 0.0, 2), stl::Trace::scalar({1.0})), std::invalid_argument);
}

TEST(Robustness, RecurrenceRejectsBoundedMasks) {
  const auto f = stl::hist(stl::ge(0, 0.0), stl::IntervalMask::range(0, 1));
  EXPECT_THROW(stl::robustness_recurrent(f, stl::Trace::scalar({1.0})), std::invalid_argument);
  EXPECT_NO_THROW(stl::final_robustness(f, stl::Trace::scalar({1.0})));
}

TEST(BooleanEval, AtomAboveThreshold) {
  EXPECT_EQ(stl::boolean_eval(stl::ge(0, 0.3), stl::Trace::scalar({0.5}), 0), 1);
}

TEST(BooleanEval, HistoricallyViolated) {
  EXPECT_EQ(stl::boolean_eval(stl::hist(stl::le(0, 0.5)), stl::Trace::scalar({0.2, 0.9}), 1), -1);
}

TEST(BooleanEval, ZeroCountsAsSatisfied) {
  EXPECT_EQ(stl::boolean_eval(stl::ge(0, 0.5), stl::Trace::scalar({0.5}), 0), 1);
  EXPECT_EQ(stl::sign_of(0.0), 1);
}

TEST(MonitorOracle, WindowedMatchesBruteForceWithBoundedMasks) {
  std::mt19937_64 rng(3);
  FormulaGen g;
  g.dim = 2;
  g.bounded = true;
  for (int i = 0; i < 300; ++i) {
    const auto f = testkit::random_formula(rng, g);
    const auto tr = testkit::random_trace(rng, 2, 1 + rng() % 12);
    expect_near_all(stl::robustness(f, tr), testkit::oracle_signal(f, tr), 0.0);
  }
}

TEST(MonitorProperty, RecurrenceEqualsDefinition) {
  std::mt19937_64 rng(5);
  FormulaGen g;
  g.dim = 2;
  for (int i = 0; i < 300; ++i) {
    const auto f = testkit::random_formula(rng, g);
    const auto tr = testkit::random_trace(rng, 2, 1 + rng() % 20);
    expect_near_all(stl::robustness_recurrent(f, tr), stl::robustness(f, tr), 1e-9);
  }
}

TEST(MonitorProperty, HistIsDualOfOnce) {
  std::mt19937_64 rng(6);
  FormulaGen g;
  g.max_depth = 2;
  g.bounded = true;
  for (int i = 0; i < 200; ++i) {
    const auto phi = testkit::random_formula(rng, g);
    const auto mask = testkit::random_mask(rng, g);
    const auto tr = testkit::random_trace(rng, 1, 10);
    const auto a = stl::robustness(stl::hist(phi, mask), tr);
    const auto b = stl::robustness(stl::once(stl::negate(phi), mask), tr);
    for (std::size_t t = 0; t < a.size(); ++t) ASSERT_EQ(a[t], -b[t]);
  }
}

TEST(MonitorProperty, UnboundedOnceRisesAndHistFalls) {
  std::mt19937_64 rng(8);
  FormulaGen g;
  g.max_depth = 2;
  for (int i = 0; i < 200; ++i) {
    const auto phi = testkit::random_formula(rng, g);
    const auto tr = testkit::random_trace(rng, 1, 15);
    const auto f = stl::robustness(stl::once(phi), tr);
    const auto h = stl::robustness(stl::hist(phi), tr);
    for (std::size_t t = 1; t < f.size(); ++t) {
      ASSERT_GE(f[t], f[t - 1]);
      ASSERT_LE(h[t], h[t - 1]);
    }
  }
}

TEST(MonitorProperty, BooleanSpecialCase) {
  std::mt19937_64 rng(9);
  FormulaGen g;
  g.dim = 2;
  g.bounded = true;
  for (int i = 0; i < 500; ++i) {
    const auto f = testkit::random_formula(rng, g);
    const auto tr = testkit::random_trace(rng, 2, 1 + rng() % 10);
    const auto b = stl::boolean_signal(f, tr);
    const auto oracle = testkit::oracle_signal(f, tr, 1.0, true);
    for (std::size_t t = 0; t < b.size(); ++t) {
      ASSERT_TRUE(b[t] == 1.0 || b[t] == -1.0);
      ASSERT_EQ(b[t], oracle[t]);
      ASSERT_EQ(stl::boolean_eval(f, tr, t), static_cast<int>(b[t]));
    }
  }
}

TEST(MonitorProperty, BooleanAgreesWithRobustSignWhenNonzero) {
  std::mt19937_64 rng(10);
  FormulaGen g;
  for (int i = 0; i < 300; ++i) {
    const auto f = testkit::random_formula(rng, g);
    const auto tr = testkit::random_trace(rng, 1, 8);
    const auto rho = stl::robustness(f, tr);
    for (std::size_t t = 0; t < rho.size(); ++t) {
      if (rho[t] != 0.0) {
        ASSERT_EQ(stl::boolean_eval(f, tr, t), stl::sign_of(rho[t]));
      }
    }
  }
}
