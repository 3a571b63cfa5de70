#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>
#include <seqformer/errors.hpp>
#include <seqformer/loss.hpp>

using namespace seqformer;

TEST(ClassifyEvent, Thresholds) {
  EXPECT_EQ(classify_event(65.0), EventClass::Hypo);
  EXPECT_EQ(classify_event(200.0), EventClass::Hyper);
  EXPECT_EQ(classify_event(70.0), EventClass::Normal);
  EXPECT_EQ(classify_event(180.0), EventClass::Normal);
  EXPECT_EQ(classify_event(69.999), EventClass::Hypo);
  EXPECT_EQ(classify_event(180.001), EventClass::Hyper);
}

TEST(ClassifyEvent, RejectsNonPositive) {
  EXPECT_THROW(classify_event(0.0), InputError);
  EXPECT_THROW(classify_event(-5.0), InputError);
  EXPECT_THROW(classify_event(std::numeric_limits<double>::quiet_NaN()), InputError);
}

TEST(EventWeights, FromCounts) {
  const EventWeights w = event_weights_from_counts({50, 750, 200});
  EXPECT_NEAR(w.hypo, 2.85, 1e-12);
  EXPECT_NEAR(w.normal, 0.25, 1e-12);
  EXPECT_NEAR(w.hyper, 1.60, 1e-12);
}

TEST(EventWeights, FromTargets) {
  std::vector<double> t;
  t.insert(t.end(), 50, 60.0);
  t.insert(t.end(), 750, 120.0);
  t.insert(t.end(), 200, 250.0);
  const EventWeights w = compute_event_weights(t);
  EXPECT_NEAR(w.hypo, 2.85, 1e-12);
  EXPECT_NEAR(w.normal, 0.25, 1e-12);
  EXPECT_NEAR(w.hyper, 1.60, 1e-12);
}

TEST(EventWeights, AllNormalClampsNormalWeight) {
  const EventWeights w = compute_event_weights(std::vector<double>(10, 100.0));
  EXPECT_DOUBLE_EQ(w.hypo, 3.0);
  EXPECT_DOUBLE_EQ(w.normal, 0.05);
  EXPECT_DOUBLE_EQ(w.hyper, 2.0);
}

TEST(EventWeights, EqualThirds) {
  const EventWeights w = event_weights_from_counts({1, 1, 1});
  EXPECT_NEAR(w.hypo, 2.0, 1e-15);
  EXPECT_NEAR(w.normal, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.hyper, 4.0 / 3.0, 1e-15);
}

TEST(EventWeights, EmptyRejected) {
  EXPECT_THROW(compute_event_weights(std::vector<double>{}), InputError);
}

TEST(BalancedMse, PerfectFitIsZero) {
  const std::vector<double> t{65.0, 100.0, 250.0};
  EXPECT_EQ(balanced_mse(t, t, EventWeights{2.85, 0.25, 1.6}), 0.0);
}

TEST(BalancedMse, SingleTerm) {
  const std::vector<double> t{100.0}, p{110.0};
  EXPECT_DOUBLE_EQ(balanced_mse(t, p, EventWeights{2.85, 0.25, 1.6}), 25.0);
}

TEST(BalancedMse, TwoTerms) {
  const std::vector<double> t{65.0, 200.0}, p{75.0, 190.0};
  EXPECT_NEAR(balanced_mse(t, p, EventWeights{2.85, 0.25, 1.6}), 445.0, 1e-10);
}

TEST(BalancedMse, WeightFollowsTargetNotPrediction) {
  // Target normal, prediction hypo: the normal weight applies.
  const std::vector<double> t{100.0}, p{50.0};
  EXPECT_DOUBLE_EQ(balanced_mse(t, p, EventWeights{3.0, 0.5, 2.0}), 0.5 * 2500.0);
}

TEST(BalancedMse, GradientMatchesFiniteDifferences) {
  const std::vector<double> t{65.0, 100.0, 250.0, 181.0};
  std::vector<double> p{70.0, 93.0, 240.0, 200.0};
  const EventWeights w{2.85, 0.25, 1.6};
  std::vector<double> grad(4);
  balanced_mse(t, p, w, grad);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = 1e-5, saved = p[i];
    p[i] = saved + h;
    const double up = balanced_mse(t, p, w);
    p[i] = saved - h;
    const double down = balanced_mse(t, p, w);
    p[i] = saved;
    EXPECT_NEAR(grad[i], (up - down) / (2 * h), 1e-6 * std::abs(grad[i]));
  }
}

TEST(BalancedMse, ShapeMismatch) {
  const std::vector<double> t{1.0, 2.0}, p{1.0};
  EXPECT_THROW(balanced_mse(t, p, EventWeights::unit()), ShapeError);
}
