#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "test_util.hpp"
#include "uavbc/config.hpp"
#include "uavbc/mlp.hpp"
#include "uavbc/rng.hpp"

using namespace uavbc;
using uavbc::testing::TempDir;

namespace {

FeatureSpec spec_for(int n, bool onehot = false) {
  FeatureSpec s;
  s.n_ues = n;
  s.include_active_ue_onehot = onehot;
  return s;
}

Eigen::MatrixXd random_inputs(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) x(r, c) = u(rng);
  return x;
}

MlpModel random_model(const FeatureSpec& spec, const std::vector<int>& hidden, std::uint64_t seed) {
  auto m = make_model(spec, hidden, spec.n_ues);
  init_he_uniform(m, seed);
  // Nonzero biases so every code path carries gradient.
  Rng rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& l : m.layers)
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = u(rng);
  return m;
}

double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  double worst = 0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-7});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

// Central differences of the mean batch loss, one parameter at a time.
void finite_difference_check(MlpModel model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const Gradients g = backward(model, x, labels);
  const double h = 1e-5;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto& l = model.layers[k];
    Eigen::MatrixXd num_w(l.w.rows(), l.w.cols());
    for (Eigen::Index i = 0; i < l.w.size(); ++i) {
      double& p = l.w.data()[i];
      const double keep = p;
      p = keep + h;
      const double up = batch_loss(model, x, labels);
      p = keep - h;
      const double down = batch_loss(model, x, labels);
      p = keep;
      num_w.data()[i] = (up - down) / (2 * h);
    }
    Eigen::VectorXd num_b(l.b.size());
    for (Eigen::Index i = 0; i < l.b.size(); ++i) {
      double& p = l.b(i);
      const double keep = p;
      p = keep + h;
      const double up = batch_loss(model, x, labels);
      p = keep - h;
      const double down = batch_loss(model, x, labels);
      p = keep;
      num_b(i) = (up - down) / (2 * h);
    }
    EXPECT_LT(max_relative_error(g.dw[k], num_w), 1e-4) << "weights of layer " << k;
    EXPECT_LT(max_relative_error(g.db[k], num_b), 1e-4) << "biases of layer " << k;
  }
}

}  // namespace

TEST(Softmax, Examples) {
  for (double p : softmax(std::vector<double>(5, 0.0))) EXPECT_DOUBLE_EQ(p, 0.2);
  const auto p = softmax(std::vector<double>{std::numbers::ln2, 0.0});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  EXPECT_THROW(softmax(std::vector<double>{1.0, NAN}), std::invalid_argument);
  EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST(Softmax, PositiveUnitSumShiftInvariant) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> theta(1 + trial % 9);
    for (auto& v : theta) v = u(rng);
    const auto p = softmax(theta);
    double sum = 0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double c = u(rng) * 10;
    auto shifted = theta;
    for (auto& v : shifted) v += c;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(CrossEntropy, AnalyticValues) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(5, 1);
  y(2, 0) = 1;
  Eigen::MatrixXd p = y;
  EXPECT_EQ(ce_loss(y, p).sum, 0.0);
  p.setConstant(0.2);
  EXPECT_NEAR(ce_loss(y, p).sum, std::log(5.0), 1e-12);
  EXPECT_NEAR(std::log(5.0), 1.60944, 1e-5);
  // Zero probability on the true class is clipped, not infinite.
  p.setZero();
  p(0, 0) = 1;
  EXPECT_NEAR(ce_loss(y, p).sum, -std::log(kProbClip), 1e-9);
  EXPECT_THROW(ce_loss(y, Eigen::MatrixXd::Zero(4, 1)), std::invalid_argument);
}

TEST(CrossEntropy, AdditiveOverBatch) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 2);
  y(0, 0) = 1;
  y(2, 1) = 1;
  Eigen::MatrixXd p(3, 2);
  p << 0.7, 0.1, 0.2, 0.3, 0.1, 0.6;
  const auto both = ce_loss(y, p);
  const double a = ce_loss(y.col(0), p.col(0)).sum;
  const double b = ce_loss(y.col(1), p.col(1)).sum;
  EXPECT_NEAR(both.sum, a + b, 1e-15);
  EXPECT_NEAR(both.mean, (a + b) / 2, 1e-15);
  EXPECT_GE(both.sum, 0.0);
}

TEST(Forward, ZeroModelIsUniform) {
  const auto m = make_model(spec_for(5), {40, 80, 160, 80}, 5);
  EXPECT_EQ(m.dims, (std::vector<int>{5, 40, 80, 160, 80, 5}));
  for (double p : forward(m, std::vector<double>{0.1, 0.5, 0.2, 0.9, 0.0})) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Forward, OutputsSumToOne) {
  const auto m = random_model(spec_for(5, true), {40, 80, 160, 80}, 3);
  const auto x = random_inputs(10, 50, 4);
  const auto p = forward_batch(m, x);
  for (Eigen::Index c = 0; c < p.cols(); ++c) EXPECT_NEAR(p.col(c).sum(), 1.0, 1e-12);
  EXPECT_THROW(forward(m, std::vector<double>(3, 0.0)), std::invalid_argument);
}

// Hand computation on a 2 -> 1 -> 2 network.
TEST(Forward, TinyNetworkByHand) {
  auto m = make_model(spec_for(2), {1}, 2);
  m.layers[0].w << 0.5, -1.0;
  m.layers[0].b << 0.25;
  m.layers[1].w << 2.0, -1.0;
  m.layers[1].b << 0.0, 0.5;
  const std::vector<double> x{0.8, 0.1};
  const double h = std::max(0.0, 0.5 * 0.8 - 1.0 * 0.1 + 0.25);  // 0.55
  const double z0 = 2.0 * h;
  const double z1 = -1.0 * h + 0.5;
  const double e0 = std::exp(z0), e1 = std::exp(z1);
  const auto p = forward(m, x);
  EXPECT_NEAR(p[0], e0 / (e0 + e1), 1e-12);
  EXPECT_NEAR(p[1], e1 / (e0 + e1), 1e-12);
}

TEST(Backward, FiniteDifferenceSmallModel) {
  const auto spec = spec_for(3);
  const auto m = random_model(spec, {6, 4}, 21);
  const auto x = random_inputs(3, 7, 22);
  finite_difference_check(m, x, {0, 1, 2, 2, 1, 0, 1});
}

TEST(Backward, FiniteDifferenceFullArchitecture) {
  const auto spec = spec_for(5, true);
  const auto m = random_model(spec, {40, 80, 160, 80}, 31);
  const auto x = random_inputs(10, 6, 32);
  finite_difference_check(m, x, {4, 0, 3, 1, 2, 2});
}

TEST(Backward, SaturatedCorrectBatchHasZeroGradient) {
  auto m = make_model(spec_for(5), {8}, 5);
  m.layers[1].b(3) = 100.0;
  const auto x = random_inputs(5, 4, 9);
  double loss = 0;
  const auto g = backward(m, x, std::vector<int>(4, 3), &loss);
  EXPECT_LT(std::sqrt(g.squared_norm()), 1e-6);
  EXPECT_LT(loss, 1e-12);
}

TEST(Backward, DuplicatedBatchGivesSameGradient) {
  const auto m = random_model(spec_for(4), {5, 5}, 41);
  const auto x = random_inputs(4, 5, 42);
  const std::vector<int> y{0, 3, 1, 1, 2};
  Eigen::MatrixXd xx(4, 10);
  xx << x, x;
  std::vector<int> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const auto g1 = backward(m, x, y);
  const auto g2 = backward(m, xx, yy);
  for (std::size_t k = 0; k < g1.dw.size(); ++k) {
    EXPECT_LT((g1.dw[k] - g2.dw[k]).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((g1.db[k] - g2.db[k]).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
  auto m = random_model(spec_for(3), {4}, 51);
  const auto before = m;
  const auto x = random_inputs(3, 6, 52);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  const auto g = backward(m, x, labels);
  auto state = make_adam_state(m);
  const double lr = 0.01;
  adam_step(m, g, state, lr);
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    for (Eigen::Index i = 0; i < m.layers[k].w.size(); ++i) {
      const double grad = g.dw[k].data()[i];
      const double step = m.layers[k].w.data()[i] - before.layers[k].w.data()[i];
      // m_hat / sqrt(v_hat) = g / |g| after one step, less the epsilon.
      const double expect = -lr * grad / (std::abs(grad) + 1e-8);
      EXPECT_NEAR(step, expect, 1e-12);
      if (std::abs(grad) > 1e-4) {
        EXPECT_NEAR(std::abs(step), lr, 1e-6);
      }
    }
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = random_model(spec_for(3), {4}, 61);
  const auto before = m;
  auto state = make_adam_state(m);
  Gradients zero;
  for (const auto& l : m.layers) {
    zero.dw.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    zero.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  for (int i = 0; i < 100; ++i) adam_step(m, zero, state, 0.01);
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    EXPECT_EQ(m.layers[k].w, before.layers[k].w);
    EXPECT_EQ(m.layers[k].b, before.layers[k].b);
  }
}

TEST(TrainConfig, LearningRateDecay) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.learning_rate(0), 0.001);
  const double decay = 0.001 / 40;
  EXPECT_DOUBLE_EQ(cfg.learning_rate(10), 0.001 / (1 + decay * 10));
}

namespace {

// Two classes split by the line x0 + x1 = 1, with a margin.
Dataset separable(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.x.resize(2, n);
  for (int i = 0; i < n; ++i) {
    double a, b;
    do {
      a = u(rng);
      b = u(rng);
    } while (std::abs(a + b - 1.0) < 0.1);
    d.x(0, i) = a;
    d.x(1, i) = b;
    d.labels.push_back(a + b > 1.0 ? 1 : 0);
  }
  return d;
}

}  // namespace

TEST(Train, SeparableToyReachesHighAccuracy) {
  const auto data = separable(200, 71);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.lr0 = 0.01;
  cfg.seed = 72;
  const auto res = train(data, {}, spec_for(2), 2, cfg);
  ASSERT_EQ(res.history.size(), 40u);
  EXPECT_GE(res.history.back().train_acc, 0.99);
}

TEST(Train, EpochCountContract) {
  const auto data = separable(50, 73);
  TrainConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 0;
  EXPECT_THROW(train(data, data, spec_for(2), 2, cfg), ConfigError);
  cfg.epochs = 1;
  const auto res = train(data, data, spec_for(2), 2, cfg);
  EXPECT_EQ(res.history.size(), 1u);
  EXPECT_EQ(res.history[0].epoch, 1);
  EXPECT_THROW(train(Dataset{Eigen::MatrixXd(2, 0), {}}, data, spec_for(2), 2, cfg), DataError);
}

TEST(Train, DeterministicForSeed) {
  const auto data = separable(120, 74);
  TrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.epochs = 5;
  cfg.batch_size = 10;
  const auto a = train(data, data, spec_for(2), 2, cfg);
  const auto b = train(data, data, spec_for(2), 2, cfg);
  for (std::size_t k = 0; k < a.model.layers.size(); ++k) {
    EXPECT_EQ(a.model.layers[k].w, b.model.layers[k].w);
    EXPECT_EQ(a.model.layers[k].b, b.model.layers[k].b);
  }
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_acc, b.history[e].val_acc);
  }
}

TEST(Evaluate, OracleModelIsPerfect) {
  // Single linear layer scaling the queue lengths: argmax of the output is argmax of q.
  auto m = make_model(spec_for(4), {}, 4);
  m.layers[0].w = 100.0 * Eigen::MatrixXd::Identity(4, 4);
  Dataset d;
  Rng rng(81);
  std::uniform_int_distribution<int> qd(0, 200);
  d.x.resize(4, 300);
  for (int i = 0; i < 300; ++i) {
    int best = 0;
    for (int r = 0; r < 4; ++r) {
      d.x(r, i) = (qd(rng) * 4 + r) / 1000.0;  // distinct per row
      if (d.x(r, i) > d.x(best, i)) best = r;
    }
    d.labels.push_back(best);
  }
  const auto rep = evaluate(m, d);
  EXPECT_DOUBLE_EQ(rep.accuracy, 1.0);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      total += rep.confusion[i][j];
      if (i != j) {
        EXPECT_EQ(rep.confusion[i][j], 0);
      }
    }
  EXPECT_EQ(total, 300);
}

TEST(Evaluate, UniformModelOnBalancedClasses) {
  const auto m = make_model(spec_for(5), {6}, 5);
  Dataset d;
  d.x = random_inputs(5, 500, 91);
  for (int i = 0; i < 500; ++i) d.labels.push_back(i % 5);
  const auto rep = evaluate(m, d);
  EXPECT_NEAR(rep.accuracy, 0.2, 1e-12);
  EXPECT_NEAR(rep.mean_loss, std::log(5.0), 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    std::int64_t row = 0;
    for (auto c : rep.confusion[i]) row += c;
    EXPECT_EQ(row, 100);
  }
}

TEST(Evaluate, AccuracyIsConfusionTrace) {
  const auto m = random_model(spec_for(5), {10}, 95);
  Dataset d;
  d.x = random_inputs(5, 333, 96);
  for (int i = 0; i < 333; ++i) d.labels.push_back((i * 7) % 5);
  const auto rep = evaluate(m, d);
  std::int64_t trace = 0, total = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      total += rep.confusion[i][j];
      if (i == j) trace += rep.confusion[i][j];
    }
  EXPECT_EQ(total, 333);
  EXPECT_DOUBLE_EQ(rep.accuracy, static_cast<double>(trace) / 333.0);
  EXPECT_EQ(rep.samples, 333);
}

TEST(Evaluate, FeatureMismatchIsDataError) {
  const auto m = random_model(spec_for(5, true), {10}, 97);
  Dataset d;
  d.x = random_inputs(5, 3, 98);
  d.labels = {0, 1, 2};
  EXPECT_THROW(evaluate(m, d), DataError);
  EXPECT_THROW(evaluate(m, Dataset{}), DataError);
}

TEST(Argmax, InvariantToUniformOutputBiasShift) {
  auto m = random_model(spec_for(5, true), {40, 80, 160, 80}, 101);
  const auto x = random_inputs(10, 200, 102);
  const auto before = forward_batch(m, x);
  m.layers.back().b.array() += 7.5;
  const auto after = forward_batch(m, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index i0, i1;
    before.col(c).maxCoeff(&i0);
    after.col(c).maxCoeff(&i1);
    EXPECT_EQ(i0, i1);
  }
}

TEST(ModelFile, RoundTripIsExact) {
  TempDir dir;
  const auto m = random_model(spec_for(5, true), {40, 80, 160, 80}, 111);
  save_model(m, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(back.dims, m.dims);
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    EXPECT_EQ(back.layers[k].w, m.layers[k].w);
    EXPECT_EQ(back.layers[k].b, m.layers[k].b);
  }
  const auto x = random_inputs(10, 100, 112);
  EXPECT_EQ(forward_batch(back, x), forward_batch(m, x));
}

TEST(ModelFile, CorruptedDimsNameTheLayer) {
  TempDir dir;
  const auto m = random_model(spec_for(3), {4, 6}, 121);
  save_model(m, dir / "m.json");
  auto text = uavbc::testing::slurp(dir / "m.json");
  const std::string from = R"("dims":[3,4,6,3])";
  ASSERT_NE(text.find(from), std::string::npos) << text.substr(0, 200);
  text.replace(text.find(from), from.size(), R"("dims":[3,4,7,3])");
  {
    std::ofstream out(dir / "m.json", std::ios::binary);
    out << text;
  }
  try {
    load_model(dir / "m.json");
    FAIL() << "corrupted model accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(ClonePolicy, ArgmaxAndGeometry) {
  auto m = make_model(spec_for(3), {}, 3);
  m.layers[0].w = 10.0 * Eigen::MatrixXd::Identity(3, 3);
  ClonePolicy p(m);
  const std::vector<int> q{10, 150, 40};
  const std::vector<int> sectors{5, 9, 30};
  const auto d = p.decide(PolicyInput{q, 0, 5, sectors, 36});
  EXPECT_EQ(d.ue, 1);
  EXPECT_EQ(d.movement, Movement::kCounterClockwise);
  EXPECT_EQ(p.source(), Source::kClone);
}
