#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "storyq/classical.hpp"
#include "storyq/features.hpp"
#include "storyq/pipeline.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace storyq;

namespace {

// Independent convex-solver oracle: Newton/IRLS on the same objective
// (mean log-likelihood minus (l2/2)||w||^2, unpenalized bias).
LinearModel irls_logistic(const Matd& X, const std::vector<int>& y, double l2, int iters = 30) {
  const long n = X.rows(), d = X.cols();
  Matd Z(n, d + 1);
  Z.leftCols(d) = X;
  Z.col(d).setOnes();
  Vecd theta = Vecd::Zero(d + 1);
  Vecd yv(n);
  for (long i = 0; i < n; ++i) yv[i] = y[static_cast<size_t>(i)];
  for (int it = 0; it < iters; ++it) {
    Vecd z = Z * theta;
    Vecd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Vecd g = Z.transpose() * (yv - p) / static_cast<double>(n);
    g.head(d) -= l2 * theta.head(d);
    Matd H = Matd::Zero(d + 1, d + 1);
    for (long i = 0; i < n; ++i) {
      double s = p[i] * (1.0 - p[i]);
      H.noalias() += s * Z.row(i).transpose() * Z.row(i);
    }
    H /= static_cast<double>(n);
    for (long j = 0; j < d; ++j) H(j, j) += l2;
    H.diagonal().array() += 1e-10;
    theta += H.ldlt().solve(g);
  }
  LinearModel model;
  model.weights = theta.head(d);
  model.bias = theta[d];
  return model;
}

struct StoryFeatures {
  Matd X;
  std::vector<int> y;
};

StoryFeatures dbow_features(const std::vector<Document>& docs, const EmbeddingTable& table) {
  StoryFeatures f;
  f.X = Matd(static_cast<long>(docs.size()), table.dimension());
  for (size_t i = 0; i < docs.size(); ++i) {
    f.X.row(static_cast<long>(i)) = dbow(tokenize(docs[i].answer_text), table).transpose();
    f.y.push_back(docs[i].story_label.value() ? 1 : 0);
  }
  return f;
}

std::vector<int> predict_all(const LinearModel& m, const Matd& X) {
  std::vector<int> out;
  for (long i = 0; i < X.rows(); ++i)
    out.push_back(predict_logistic(m, X.row(i).transpose()) > 0.5 ? 1 : 0);
  return out;
}

}  // namespace

TEST_CASE("logistic regression basics") {
  SUBCASE("perfectly symmetric data keeps the bias at zero") {
    Matd X(4, 2);
    X << 1, 2, -1, -2, 0.5, -1, -0.5, 1;
    std::vector<int> y = {1, 0, 1, 0};
    LinearModel m = train_logistic(X, y, {.l2 = 0.0, .epochs = 500, .lr = 0.3});
    CHECK(std::abs(m.bias) < 1e-12);  // zero up to sigmoid roundoff
  }
  SUBCASE("separable toy set reaches training F1 = 1") {
    Matd X(4, 2);
    X << 0, 0, 0, 1, 2, 0, 2, 1;
    std::vector<int> y = {0, 0, 1, 1};
    LinearModel m = train_logistic(X, y, {.l2 = 0.0, .epochs = 3000, .lr = 1.0});
    BinaryMetrics metrics = binary_metrics(y, predict_all(m, X));
    CHECK(metrics.f1 == 1.0);
  }
  SUBCASE("empty training set is an input error") {
    CHECK_THROWS_AS(train_logistic(Matd(0, 2), {}, {}), InputError);
  }
  SUBCASE("loss decreases monotonically with a small learning rate") {
    Matd X(6, 2);
    X << 1, 0.5, 2, -1, -1, 0.25, -2, 1, 0.5, 2, -0.5, -2;
    std::vector<int> y = {1, 1, 0, 0, 1, 0};
    double prev = std::numeric_limits<double>::infinity();
    for (int epochs = 1; epochs <= 40; ++epochs) {
      LinearModel m = train_logistic(X, y, {.l2 = 0.0, .epochs = epochs, .lr = 0.05});
      double nll = logistic_nll(m, X, y);
      CHECK(nll <= prev + 1e-12);
      prev = nll;
    }
  }
}

TEST_CASE("predict_logistic is the standard sigmoid") {
  LinearModel m;
  m.weights = Vecd::Zero(1);
  CHECK(predict_logistic(m, Vecd::Zero(1)) == 0.5);
  m.weights[0] = 1.0;
  CHECK(predict_logistic(m, Vecd::Zero(1)) == 0.5);

  SUBCASE("monotone in the bias toward 1") {
    Vecd x = Vecd::Zero(1);
    double prev = 0.0;
    for (double b : {0.0, 1.0, 5.0, 20.0, 100.0}) {
      m.bias = b;
      double p = predict_logistic(m, x);
      CHECK(p >= prev);
      prev = p;
    }
    CHECK(prev > 1.0 - 1e-9);
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(predict_logistic(m, Vecd::Zero(3)), DimensionError);
  }
}

TEST_CASE("logistic matches an independent convex-solver oracle on the replica task") {
  StoryTaskSpec spec;
  spec.n_docs = 2000;
  spec.seed = 404;
  SyntheticCorpus corpus = generate_story_corpus(spec);
  std::vector<Document> train_docs(corpus.docs.begin(), corpus.docs.begin() + 1400);
  std::vector<Document> test_docs(corpus.docs.begin() + 1400, corpus.docs.end());
  StoryFeatures train = dbow_features(train_docs, corpus.table);
  StoryFeatures test = dbow_features(test_docs, corpus.table);
  // DBoW sums grow with document length; scale for a well-conditioned descent
  train.X /= 40.0;
  test.X /= 40.0;

  LinearModel gd = train_logistic(train.X, train.y, {.l2 = 1e-4, .epochs = 2000, .lr = 0.5});
  LinearModel oracle = irls_logistic(train.X, train.y, 1e-4);
  double f1_gd = binary_metrics(test.y, predict_all(gd, test.X)).f1;
  double f1_oracle = binary_metrics(test.y, predict_all(oracle, test.X)).f1;
  CHECK(f1_gd > 0.6);
  CHECK(std::abs(f1_gd - f1_oracle) <= 0.05);
}

TEST_CASE("lasso coordinate descent") {
  SUBCASE("large lambda zeroes all weights and leaves the target mean") {
    Rng rng(5);
    Matd X(30, 3);
    Vecd y(30);
    for (long i = 0; i < 30; ++i) {
      for (long j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
      y[i] = rng.uniform(0.0, 4.0);
    }
    LinearModel m = train_lasso(X, y, 1e6);
    CHECK(m.weights.norm() == 0.0);
    CHECK(m.bias == doctest::Approx(y.mean()));
  }
  SUBCASE("lambda = 0 matches the normal equations to 1e-8") {
    Rng rng(6);
    Matd X(40, 4);
    Vecd y(40);
    for (long i = 0; i < 40; ++i) {
      for (long j = 0; j < 4; ++j) X(i, j) = rng.uniform(-2.0, 2.0);
      y[i] = rng.uniform(-3.0, 3.0);
    }
    LinearModel m = train_lasso(X, y, 0.0, 1e-13, 200000);
    // normal-equations oracle on the augmented system
    Matd Z(40, 5);
    Z.leftCols(4) = X;
    Z.col(4).setOnes();
    Vecd theta = (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
    CHECK((m.weights - theta.head(4)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(std::abs(m.bias - theta[4]) < 1e-8);
  }
  SUBCASE("single centered feature follows the soft-threshold formula") {
    Rng rng(7);
    const double lambda = 0.3;
    Matd X(50, 1);
    Vecd y(50);
    for (long i = 0; i < 50; ++i) {
      X(i, 0) = rng.uniform(-1.0, 1.0);
      y[i] = 0.8 * X(i, 0) + rng.uniform(-0.1, 0.1);
    }
    X.col(0).array() -= X.col(0).mean();
    y.array() -= y.mean();
    LinearModel m = train_lasso(X, y, lambda, 1e-12);
    double rho = X.col(0).dot(y) / 50.0;
    double z = X.col(0).squaredNorm() / 50.0;
    double expected = rho > lambda ? (rho - lambda) / z : (rho < -lambda ? (rho + lambda) / z : 0.0);
    CHECK(m.weights[0] == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("objective never increases across sweeps") {
    Rng rng(8);
    Matd X(25, 6);
    Vecd y(25);
    for (long i = 0; i < 25; ++i) {
      for (long j = 0; j < 6; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
      y[i] = rng.uniform(-2.0, 2.0);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int sweeps = 1; sweeps <= 12; ++sweeps) {
      LinearModel m = train_lasso(X, y, 0.05, 0.0, sweeps);
      double obj = lasso_objective(m, X, y, 0.05);
      CHECK(obj <= prev + 1e-12);
      prev = obj;
    }
  }
}

TEST_CASE("random forest") {
  SUBCASE("constant labels predict that constant") {
    Matd X(10, 2);
    Rng rng(9);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(0.0, 1.0);
    Vecd y = Vecd::Constant(10, 3.0);
    ForestModel forest = train_forest(X, y, 20, ForestTask::classify, 1);
    for (long i = 0; i < 10; ++i) CHECK(forest.predict(X.row(i).transpose()) == 3.0);
  }
  SUBCASE("single tree on a single sample predicts that sample") {
    Matd X(1, 2);
    X << 0.3, 0.7;
    Vecd y(1);
    y << 1.25;
    ForestModel forest = train_forest(X, y, 1, ForestTask::regress, 2);
    CHECK(forest.predict(X.row(0).transpose()) == 1.25);
  }
  SUBCASE("noiseless XOR: out-of-bag accuracy above 0.95") {
    // XOR is separable by axis splits in two levels, so fully grown trees fit
    // their bootstrap exactly and the ensemble votes the pattern out
    Rng rng(10);
    const int n = 200;
    Matd X(n, 2);
    Vecd y(n);
    for (int i = 0; i < n; ++i) {
      double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0);
      X(i, 0) = a;
      X(i, 1) = b;
      y[i] = ((a > 0.5) != (b > 0.5)) ? 1.0 : 0.0;
    }
    ForestModel forest = train_forest(X, y, 100, ForestTask::classify, 11);
    CHECK(forest_oob_accuracy(forest, X, y) > 0.95);
  }
  SUBCASE("classification output is always one of the observed labels") {
    Rng rng(12);
    Matd X(30, 3);
    Vecd y(30);
    for (long i = 0; i < 30; ++i) {
      for (long j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
      y[i] = static_cast<double>(rng.uniform_int(3)) * 2.0;  // labels 0, 2, 4
    }
    ForestModel forest = train_forest(X, y, 15, ForestTask::classify, 13);
    for (int trial = 0; trial < 20; ++trial) {
      Vecd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-2.0, 2.0);
      double pred = forest.predict(x);
      CHECK((pred == 0.0 || pred == 2.0 || pred == 4.0));
    }
  }
  SUBCASE("empty data is an input error") {
    CHECK_THROWS_AS(train_forest(Matd(0, 2), Vecd(0), 5, ForestTask::classify, 0), InputError);
  }
}

namespace {

Committee fixed_vote_committee(int positive, int total) {
  // members vote by bias alone on x = 0
  Committee c;
  for (int i = 0; i < total; ++i) {
    LinearModel m;
    m.weights = Vecd::Zero(1);
    m.bias = i < positive ? 5.0 : -5.0;
    c.members.push_back(m);
  }
  return c;
}

}  // namespace

TEST_CASE("committee construction and vote entropy") {
  SUBCASE("even committee size is a configuration error") {
    Matd X(4, 1);
    X << 0, 1, 2, 3;
    std::vector<int> y = {0, 0, 1, 1};
    CHECK_THROWS_AS(build_committee(X, y, 4, 0), ConfigError);
  }
  SUBCASE("training is deterministic, so equal resamples give equal members") {
    Matd X(20, 2);
    Rng rng(14);
    std::vector<int> y;
    for (long i = 0; i < 20; ++i) {
      X(i, 0) = rng.uniform(-1.0, 1.0);
      X(i, 1) = rng.uniform(-1.0, 1.0);
      y.push_back(X(i, 0) + X(i, 1) > 0 ? 1 : 0);
    }
    Committee a = build_committee(X, y, 5, 77);
    Committee b = build_committee(X, y, 5, 77);
    REQUIRE(a.members.size() == b.members.size());
    for (size_t i = 0; i < a.members.size(); ++i) {
      CHECK(a.members[i].bias == b.members[i].bias);
      CHECK((a.members[i].weights - b.members[i].weights).norm() == 0.0);
    }
  }
  SUBCASE("a one-member committee behaves like its single model") {
    Matd X(12, 1);
    std::vector<int> y;
    for (long i = 0; i < 12; ++i) {
      X(i, 0) = static_cast<double>(i) - 5.5;
      y.push_back(i >= 6 ? 1 : 0);
    }
    Committee c = build_committee(X, y, 1, 3);
    REQUIRE(c.members.size() == 1);
    for (double v : {-3.0, 0.1, 4.0}) {
      Vecd x(1);
      x << v;
      CHECK(committee_vote(c, x) == (predict_logistic(c.members[0], x) > 0.5 ? 1 : 0));
      CHECK(disagreement(c, x) == 0.0);
    }
  }
  SUBCASE("unanimous vote has zero entropy, 6-5 is about 0.6890 nats") {
    Vecd x = Vecd::Zero(1);
    CHECK(disagreement(fixed_vote_committee(11, 11), x) == 0.0);
    CHECK(disagreement(fixed_vote_committee(0, 11), x) == 0.0);
    double h = disagreement(fixed_vote_committee(6, 11), x);
    CHECK(h == doctest::Approx(0.6890).epsilon(1e-4));
    CHECK(h <= std::log(2.0));
  }
  SUBCASE("entropy is symmetric in polarity and maximal at the evenest split") {
    Vecd x = Vecd::Zero(1);
    double best = 0.0;
    for (int positive = 0; positive <= 11; ++positive) {
      double h = disagreement(fixed_vote_committee(positive, 11), x);
      CHECK(h == doctest::Approx(disagreement(fixed_vote_committee(11 - positive, 11), x)));
      best = std::max(best, h);
    }
    CHECK(best == doctest::Approx(disagreement(fixed_vote_committee(6, 11), x)));
  }
}

TEST_CASE("committee majority holds up against a single model across seeds") {
  std::vector<double> committee_f1, single_f1;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    StoryTaskSpec spec;
    spec.n_docs = 700;
    spec.seed = 1000 + seed;
    SyntheticCorpus corpus = generate_story_corpus(spec);
    std::vector<Document> train_docs(corpus.docs.begin(), corpus.docs.begin() + 500);
    std::vector<Document> test_docs(corpus.docs.begin() + 500, corpus.docs.end());
    StoryFeatures train = dbow_features(train_docs, corpus.table);
    StoryFeatures test = dbow_features(test_docs, corpus.table);
    train.X /= 40.0;
    test.X /= 40.0;

    LogisticConfig cfg{.l2 = 1e-4, .epochs = 400, .lr = 0.5, .seed = 0};
    Committee committee = build_committee(train.X, train.y, 11, seed, cfg);
    LinearModel single = train_logistic(train.X, train.y, cfg);

    std::vector<int> committee_pred, single_pred;
    for (long i = 0; i < test.X.rows(); ++i) {
      committee_pred.push_back(committee_vote(committee, test.X.row(i).transpose()));
      single_pred.push_back(predict_logistic(single, test.X.row(i).transpose()) > 0.5 ? 1 : 0);
    }
    committee_f1.push_back(binary_metrics(test.y, committee_pred).f1);
    single_f1.push_back(binary_metrics(test.y, single_pred).f1);
  }
  CHECK(median_of(committee_f1) >= median_of(single_f1) - 0.02);
}

TEST_CASE("select_queries ranks by disagreement with id tie-breaks") {
  Committee c = fixed_vote_committee(6, 11);  // members split by bias sign on dim 0
  // item features: positive -> all members agree via weights; craft per-item
  Committee crafted;
  for (int i = 0; i < 11; ++i) {
    LinearModel m;
    m.weights = Vecd(1);
    m.weights[0] = i < 6 ? 1.0 : -1.0;  // disagree on x != 0, agree via bias below
    m.bias = 0.0;
    crafted.members.push_back(m);
  }
  std::vector<PoolItem> pool;
  pool.push_back({"doc_b", Vecd::Zero(1)});   // 0-11 vote: unanimous (p<=0.5 everywhere)
  pool.push_back({"doc_a", Vecd::Zero(1)});   // unanimous too
  PoolItem split{"doc_z", Vecd(1)};
  split.features[0] = 1.0;  // 6 members vote positive, 5 negative
  pool.push_back(split);

  SUBCASE("the split-vote item ranks first") {
    auto ids = select_queries(crafted, pool, 2);
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == "doc_z");
    CHECK(ids[1] == "doc_a");  // tie between unanimous items broken by id
  }
  SUBCASE("all-unanimous pool falls back to id order") {
    pool.pop_back();
    auto ids = select_queries(crafted, pool, 2);
    CHECK(ids[0] == "doc_a");
    CHECK(ids[1] == "doc_b");
  }
  SUBCASE("pool smaller than n is an input error") {
    CHECK_THROWS_AS(select_queries(crafted, pool, 10), InputError);
  }
  SUBCASE("selection is deterministic") {
    auto a = select_queries(crafted, pool, 3);
    auto b = select_queries(crafted, pool, 3);
    CHECK(a == b);
  }
}

TEST_CASE("majority_vote over exactly three votes") {
  CHECK(majority_vote({true, true, true}) == std::pair<bool, bool>{true, true});
  CHECK(majority_vote({true, true, false}) == std::pair<bool, bool>{true, false});
  CHECK(majority_vote({false, true, false}) == std::pair<bool, bool>{false, false});
  CHECK(majority_vote({false, false, false}) == std::pair<bool, bool>{false, true});
  CHECK_THROWS_AS(majority_vote({true, false}), InputError);
  CHECK_THROWS_AS(majority_vote({true, false, true, true}), InputError);
}
