#include <ensemblex/core.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace ensemblex;

TEST(Softmax, UniformScoresGiveUniformProbabilities) {
  auto p = softmax_unit(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, TwoClassHandValue) {
  auto p = softmax_unit(std::vector<double>{1.0, 0.0});
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (1.0 + e), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(p[0], 0.73106, 1e-5);
  EXPECT_NEAR(p[1], 0.26894, 1e-5);
}

TEST(Softmax, LargeScoresDoNotOverflow) {
  auto p = softmax_unit(std::vector<double>{1000.0, 0.0});
  EXPECT_TRUE(std::isfinite(p[0]));
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
}

TEST(Softmax, RejectsNonFinite) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(softmax_unit(std::vector<double>{0.0, inf}), Error);
  EXPECT_THROW(softmax_unit(std::vector<double>{std::nan(""), 0.0}), Error);
  try {
    softmax_unit(std::vector<double>{0.0, inf});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Softmax, MatchesTextbookFormula) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(5);
    for (auto& v : s) v = nd(rng);
    auto got = softmax_unit(s);
    auto want = oracle::softmax(s);
    double sum = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      EXPECT_NEAR(got[k], want[k], 1e-14);
      sum += got[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, ShiftInvariance) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 4.0);
  std::uniform_real_distribution<double> shift(-500.0, 500.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(6);
    for (auto& v : s) v = nd(rng);
    const double c = shift(rng);
    auto shifted = s;
    for (auto& v : shifted) v += c;
    auto a = softmax_unit(s), b = softmax_unit(shifted);
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Softmax, LogExpRoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 10.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(4);
    for (auto& v : s) v = nd(rng);
    auto p = softmax_unit(s);
    for (double v : p) {
      if (v < 1e-300) continue;
      EXPECT_NEAR(std::exp(std::log(v)), v, 1e-9 * std::max(v, 1e-300) + 1e-300);
    }
    auto lp = log_softmax_unit(s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (p[k] < 1e-300) continue;
      EXPECT_NEAR(std::exp(lp[k]), p[k], 1e-9);
    }
  }
}

TEST(SoftmaxTensor, AllZeroTensor) {
  ScoreTensor s(2, 2, 3, std::vector<double>(12, 0.0));
  auto p = softmax_tensor(s);
  for (double v : p.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTensor, SingleUnitSingleLearnerReducesToUnit) {
  std::vector<double> row{0.3, -1.2, 2.5, 0.0};
  ScoreTensor s(1, 1, 4, row);
  auto p = softmax_tensor(s);
  auto q = softmax_unit(row);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p.at(0, 0, k), q[k]);
}

TEST(SoftmaxTensor, RowsSumToOne) {
  std::mt19937_64 rng(5);
  auto s = oracle::random_scores(20, 3, 7, 15.0, rng);
  auto p = softmax_tensor(s);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double sum = 0.0;
      for (double v : p.row(i, j)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(LogSumExp, HandValues) {
  EXPECT_NEAR(log_sum_exp(std::vector<double>{0.0, 0.0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{0.0, 0.0}), 0.693147, 1e-6);
  EXPECT_EQ(log_sum_exp(std::vector<double>{-3.25}), -3.25);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-12);
}

TEST(LogSumExp, EmptyIsAnError) {
  EXPECT_THROW(log_sum_exp(std::vector<double>{}), Error);
}

TEST(LogSumExp, RelativeAccuracyAgainstLongDouble) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 5.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> xs(8);
    long double acc = 0.0L;
    for (auto& v : xs) {
      v = nd(rng);
      acc += std::exp(static_cast<long double>(v));
    }
    const double want = static_cast<double>(std::log(acc));
    EXPECT_NEAR(log_sum_exp(xs), want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(Argmax, Basics) {
  EXPECT_EQ(argmax_class(std::vector<double>{0.1, 0.7, 0.2}), 1u);
  EXPECT_EQ(argmax_class(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax_class(std::vector<double>{3.0}), 0u);
  EXPECT_THROW(argmax_class(std::vector<double>{}), Error);
}

TEST(Argmax, InvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(5);
    for (auto& x : v) x = std::round(nd(rng) * 2.0) / 2.0;  // coarse grid so ties occur
    std::vector<double> cubed(v.size()), expd(v.size()), affine(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      cubed[k] = v[k] * v[k] * v[k];
      expd[k] = std::exp(v[k]);
      affine[k] = 3.0 * v[k] - 11.0;
    }
    const auto want = argmax_class(v);
    EXPECT_EQ(argmax_class(cubed), want);
    EXPECT_EQ(argmax_class(expd), want);
    EXPECT_EQ(argmax_class(affine), want);
  }
}

TEST(Types, ScoreTensorInvariants) {
  EXPECT_THROW(ScoreTensor(0, 1, 2, {}), Error);
  EXPECT_THROW(ScoreTensor(1, 0, 2, {}), Error);
  EXPECT_THROW(ScoreTensor(1, 1, 1, {0.0}), Error);
  EXPECT_THROW(ScoreTensor(1, 1, 2, {0.0}), Error);
  try {
    ScoreTensor(1, 1, 2, {0.0, std::numeric_limits<double>::quiet_NaN()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
  ScoreTensor s(2, 3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  EXPECT_EQ(s.at(1, 2, 1), 12.0);
  EXPECT_EQ(s.at(0, 1, 0), 3.0);
  EXPECT_EQ(s.row(1, 0)[0], 7.0);
}

TEST(Types, ProbTensorInvariants) {
  EXPECT_NO_THROW(ProbTensor(1, 1, 2, {0.25, 0.75}));
  EXPECT_THROW(ProbTensor(1, 1, 2, {0.3, 0.6}), Error);
  EXPECT_THROW(ProbTensor(1, 1, 2, {1.5, -0.5}), Error);
}

TEST(Types, LabelVectorRange) {
  EXPECT_NO_THROW(LabelVector({0, 1, 2}, 3));
  EXPECT_THROW(LabelVector({0, 3}, 3), Error);
}

TEST(Types, WeightVectorConstraints) {
  EXPECT_NO_THROW(WeightVector({0.25, 0.75}, Constraint::simplex()));
  EXPECT_THROW(WeightVector({0.5, 0.6}, Constraint::simplex()), Error);
  EXPECT_THROW(WeightVector({-0.5, 1.5}, Constraint::simplex()), Error);
  EXPECT_NO_THROW(WeightVector({-2.0, 3.0}, Constraint::l1(5.0)));
  EXPECT_THROW(WeightVector({-3.0, 3.0}, Constraint::l1(5.0)), Error);
  EXPECT_THROW(Constraint::l1(0.0), Error);
  EXPECT_NO_THROW(WeightVector({-30.0, 30.0}, Constraint::unconstrained()));
}

TEST(NllFromScores, FlooredAtClippingFloor) {
  EXPECT_NEAR(nll_from_scores(std::vector<double>{0.0, 0.0}, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(nll_from_scores(std::vector<double>{0.0, -1000.0}, 1), -std::log(kProbFloor), 1e-12);
}

TEST(Slicing, PermuteAndStackLearners) {
  ScoreTensor s(2, 3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  std::vector<std::size_t> order{2, 0, 1};
  auto p = permute_learners(s, order);
  EXPECT_EQ(p.at(0, 0, 0), 5.0);
  EXPECT_EQ(p.at(1, 2, 1), 10.0);
  std::vector<ScoreTensor> parts{learner_slice(s, 0), learner_slice(s, 1), learner_slice(s, 2)};
  EXPECT_EQ(stack_learners(parts), s);
  EXPECT_EQ(unit_slice(s, 1, 2).at(0, 0, 0), 7.0);
}
