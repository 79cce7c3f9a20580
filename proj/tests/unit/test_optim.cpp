#include "fppformer/optim.hpp"
#include "test_util.hpp"

using namespace fppformer;
using namespace fpptest;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  std::vector<Tensor> params{random_leaf({3, 2}, rng), random_leaf({4}, rng)};
  const auto before = std::vector{params[0].to_vector(), params[1].to_vector()};
  AdamState state(params, 1e-3);
  adam_step(params, {std::vector<double>(6, 0.0), std::vector<double>(4, 0.0)}, state);
  EXPECT_EQ(params[0].to_vector(), before[0]);
  EXPECT_EQ(params[1].to_vector(), before[1]);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  std::vector<Tensor> params{Tensor::parameter({1}, {0.0})};
  AdamState state(params, 0.1);
  adam_step(params, {{1.0}}, state);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(params[0].at(0), -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, MatchesClosedFormOverSeveralSteps) {
  std::vector<Tensor> params{Tensor::parameter({1}, {0.5})};
  AdamState state(params, 0.01);
  const std::vector<double> gs{0.3, -1.2, 0.7, 2.0};
  double p = 0.5, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= gs.size(); ++t) {
    adam_step(params, {{gs[t - 1]}}, state);
    m = 0.9 * m + 0.1 * gs[t - 1];
    v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    p -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(params[0].at(0), p, 1e-14) << "step " << t;
  }
}

TEST(Adam, IdenticalParametersGetIdenticalUpdates) {
  std::vector<Tensor> params{Tensor::parameter({3}, {1, 2, 3}), Tensor::parameter({3}, {1, 2, 3})};
  AdamState state(params, 0.05);
  for (int i = 0; i < 3; ++i) adam_step(params, {{0.1, -0.2, 0.3}, {0.1, -0.2, 0.3}}, state);
  EXPECT_EQ(params[0].to_vector(), params[1].to_vector());
}

TEST(Adam, UsesAccumulatedGradients) {
  std::vector<Tensor> params{Tensor::parameter({2}, {1.0, -1.0})};
  backward(sum(square(params[0])));
  AdamState state(params, 0.1);
  adam_step(params, state);
  EXPECT_NEAR(params[0].at(0), 0.9, 1e-7);
  EXPECT_NEAR(params[0].at(1), -0.9, 1e-7);
}

TEST(Adam, ShapeMismatchIsRejected) {
  std::vector<Tensor> params{Tensor::parameter({2}, {0.0, 0.0})};
  AdamState state(params, 0.1);
  EXPECT_THROW(adam_step(params, {{1.0, 2.0, 3.0}}, state), ShapeError);
  EXPECT_THROW(adam_step(params, {}, state), ShapeError);
}

TEST(Adam, LearningRateIsReadEachStep) {
  std::vector<Tensor> a{Tensor::parameter({1}, {0.0})};
  std::vector<Tensor> b{Tensor::parameter({1}, {0.0})};
  AdamState sa(a, 0.1), sb(b, 0.1);
  adam_step(a, {{1.0}}, sa);
  adam_step(b, {{1.0}}, sb);
  sb.lr = 0.05;
  adam_step(a, {{1.0}}, sa);
  adam_step(b, {{1.0}}, sb);
  const double first = -0.1 / (1.0 + 1e-8);
  EXPECT_NEAR(a[0].at(0) - first, 2.0 * (b[0].at(0) - first), 1e-12);
}
