#include "storyq/classical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace storyq {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LinearModel train_logistic(const Matd& X, const std::vector<int>& y, const LogisticConfig& cfg) {
  const long n = X.rows(), d = X.cols();
  if (n == 0) throw InputError("train_logistic: empty training set");
  if (static_cast<long>(y.size()) != n) throw DimensionError("train_logistic: label count mismatch");
  for (int label : y)
    if (label != 0 && label != 1) throw InputError("train_logistic: labels must be 0 or 1");

  LinearModel model;
  model.weights = Vecd::Zero(d);
  model.bias = 0.0;
  model.regularization = cfg.l2 > 0 ? "l2" : "none";
  model.reg_strength = cfg.l2;

  Vecd yv(n);
  for (long i = 0; i < n; ++i) yv[i] = static_cast<double>(y[static_cast<size_t>(i)]);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Vecd z = X * model.weights;
    z.array() += model.bias;
    Vecd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Vecd err = yv - p;
    Vecd gw = X.transpose() * err / static_cast<double>(n) - cfg.l2 * model.weights;
    double gb = err.sum() / static_cast<double>(n);
    model.weights += cfg.lr * gw;
    model.bias += cfg.lr * gb;
  }
  return model;
}

double predict_logistic(const LinearModel& model, const Vecd& x) {
  if (x.size() != model.weights.size())
    throw DimensionError(strfmt("predict_logistic: feature size %ld, model expects %ld",
                                static_cast<long>(x.size()), static_cast<long>(model.weights.size())));
  return sigmoid(model.weights.dot(x) + model.bias);
}

double logistic_nll(const LinearModel& model, const Matd& X, const std::vector<int>& y) {
  double nll = 0.0;
  for (long i = 0; i < X.rows(); ++i) {
    double z = model.weights.dot(X.row(i)) + model.bias;
    // -log P(y|x) in a numerically stable form
    double t = static_cast<double>(y[static_cast<size_t>(i)]);
    nll += std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
  }
  return nll;
}

LinearModel train_lasso(const Matd& X, const Vecd& y, double lambda, double tol, int max_sweeps) {
  const long n = X.rows(), d = X.cols();
  if (n == 0) throw InputError("train_lasso: empty training set");
  LinearModel model;
  model.weights = Vecd::Zero(d);
  model.regularization = "l1";
  model.reg_strength = lambda;

  Vecd col_sq(d);
  for (long j = 0; j < d; ++j) col_sq[j] = X.col(j).squaredNorm() / static_cast<double>(n);

  model.bias = y.mean();
  Vecd residual = y;
  residual.array() -= model.bias;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    double db = residual.mean();
    model.bias += db;
    residual.array() -= db;
    max_change = std::abs(db);

    for (long j = 0; j < d; ++j) {
      if (col_sq[j] == 0.0) continue;
      double old = model.weights[j];
      double rho = X.col(j).dot(residual) / static_cast<double>(n) + col_sq[j] * old;
      double next = 0.0;
      if (rho > lambda)
        next = (rho - lambda) / col_sq[j];
      else if (rho < -lambda)
        next = (rho + lambda) / col_sq[j];
      if (next != old) {
        residual += X.col(j) * (old - next);
        model.weights[j] = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change < tol) break;
  }
  return model;
}

double predict_linear(const LinearModel& model, const Vecd& x) {
  if (x.size() != model.weights.size())
    throw DimensionError("predict_linear: feature size mismatch");
  return model.weights.dot(x) + model.bias;
}

double lasso_objective(const LinearModel& model, const Matd& X, const Vecd& y, double lambda) {
  Vecd r = y - X * model.weights;
  r.array() -= model.bias;
  return r.squaredNorm() / (2.0 * static_cast<double>(X.rows())) +
         lambda * model.weights.lpNorm<1>();
}

// ---------------------------------------------------------------------------

double DecisionTree::predict(const Vecd& x) const {
  int node = 0;
  while (nodes[static_cast<size_t>(node)].feature >= 0) {
    const TreeNode& nd = nodes[static_cast<size_t>(node)];
    node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<size_t>(node)].value;
}

double ForestModel::predict(const Vecd& x) const {
  if (task == ForestTask::regress) {
    double sum = 0.0;
    for (const DecisionTree& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
  }
  std::map<double, int> votes;
  for (const DecisionTree& t : trees) votes[t.predict(x)] += 1;
  double best = votes.begin()->first;
  int best_count = votes.begin()->second;
  for (const auto& [label, count] : votes)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

namespace {

struct TreeBuilder {
  const Matd& X;
  const Vecd& y;
  ForestTask task;
  int mtry;
  Rng& rng;
  DecisionTree tree;

  double leaf_value(const std::vector<int>& idx) const {
    if (task == ForestTask::regress) {
      double s = 0.0;
      for (int i : idx) s += y[i];
      return s / static_cast<double>(idx.size());
    }
    std::map<double, int> counts;
    for (int i : idx) counts[y[i]] += 1;
    double best = counts.begin()->first;
    int best_count = counts.begin()->second;
    for (const auto& [label, count] : counts)
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    return best;
  }

  double impurity(const std::vector<int>& idx) const {
    if (task == ForestTask::regress) {
      double m = 0.0;
      for (int i : idx) m += y[i];
      m /= static_cast<double>(idx.size());
      double v = 0.0;
      for (int i : idx) v += (y[i] - m) * (y[i] - m);
      return v / static_cast<double>(idx.size());
    }
    std::map<double, int> counts;
    for (int i : idx) counts[y[i]] += 1;
    double gini = 1.0;
    for (const auto& [label, count] : counts) {
      double p = static_cast<double>(count) / static_cast<double>(idx.size());
      gini -= p * p;
    }
    return gini;
  }

  bool pure(const std::vector<int>& idx) const {
    for (size_t i = 1; i < idx.size(); ++i)
      if (y[idx[i]] != y[idx[0]]) return false;
    return true;
  }

  // best (feature, threshold) over the given features; returns feature -1 when
  // nothing splits
  std::tuple<int, double, double> best_split(const std::vector<int>& idx,
                                             const std::vector<int>& features) const {
    const double parent = impurity(idx);
    int best_feature = -1;
    double best_threshold = 0.0, best_gain = -1.0;
    std::vector<std::pair<double, int>> order;
    order.reserve(idx.size());
    for (int f : features) {
      order.clear();
      for (int i : idx) order.emplace_back(X(i, f), i);
      std::sort(order.begin(), order.end());
      for (size_t k = 0; k + 1 < order.size(); ++k) {
        if (order[k].first == order[k + 1].first) continue;
        double threshold = 0.5 * (order[k].first + order[k + 1].first);
        std::vector<int> left, right;
        left.reserve(k + 1);
        right.reserve(order.size() - k - 1);
        for (size_t m = 0; m <= k; ++m) left.push_back(order[m].second);
        for (size_t m = k + 1; m < order.size(); ++m) right.push_back(order[m].second);
        double wl = static_cast<double>(left.size()) / static_cast<double>(idx.size());
        double gain = parent - wl * impurity(left) - (1.0 - wl) * impurity(right);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }
    return {best_feature, best_threshold, best_gain};
  }

  int build(std::vector<int> idx) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (idx.size() < 2 || pure(idx)) {
      tree.nodes[static_cast<size_t>(node_id)].value = leaf_value(idx);
      return node_id;
    }

    const int d = static_cast<int>(X.cols());
    std::vector<int> all_features(static_cast<size_t>(d));
    std::iota(all_features.begin(), all_features.end(), 0);
    std::vector<int> subset = all_features;
    rng.shuffle(subset);
    subset.resize(static_cast<size_t>(std::min(mtry, d)));
    std::sort(subset.begin(), subset.end());

    auto [feature, threshold, gain] = best_split(idx, subset);
    if (feature < 0) {
      // the sampled features were constant on this node; fall back to all
      std::tie(feature, threshold, gain) = best_split(idx, all_features);
    }
    if (feature < 0) {
      tree.nodes[static_cast<size_t>(node_id)].value = leaf_value(idx);
      return node_id;
    }

    std::vector<int> left_idx, right_idx;
    for (int i : idx) (X(i, feature) <= threshold ? left_idx : right_idx).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    int left = build(std::move(left_idx));
    int right = build(std::move(right_idx));
    TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
    node.feature = feature;
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }
};

}  // namespace

ForestModel train_forest(const Matd& X, const Vecd& y, int n_trees, ForestTask task, uint64_t seed) {
  const long n = X.rows();
  if (n == 0) throw InputError("train_forest: empty training set");
  if (n_trees < 1) throw ConfigError("train_forest: n_trees must be >= 1");
  const int d = static_cast<int>(X.cols());
  const int mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));

  ForestModel forest;
  forest.task = task;
  forest.seed = seed;
  forest.trees.reserve(static_cast<size_t>(n_trees));
  forest.bootstrap.reserve(static_cast<size_t>(n_trees));
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(t + 1));
    std::vector<int> sample(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) sample[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(n));
    TreeBuilder builder{X, y, task, mtry, rng, {}};
    builder.build(sample);
    forest.trees.push_back(std::move(builder.tree));
    forest.bootstrap.push_back(std::move(sample));
  }
  return forest;
}

double forest_oob_accuracy(const ForestModel& forest, const Matd& X, const Vecd& y) {
  const long n = X.rows();
  std::vector<std::set<int>> in_bag(forest.trees.size());
  for (size_t t = 0; t < forest.trees.size(); ++t)
    in_bag[t].insert(forest.bootstrap[t].begin(), forest.bootstrap[t].end());

  long covered = 0, correct = 0;
  for (long i = 0; i < n; ++i) {
    std::map<double, int> votes;
    for (size_t t = 0; t < forest.trees.size(); ++t) {
      if (in_bag[t].count(static_cast<int>(i))) continue;
      votes[forest.trees[t].predict(X.row(i))] += 1;
    }
    if (votes.empty()) continue;
    ++covered;
    double best = votes.begin()->first;
    int best_count = votes.begin()->second;
    for (const auto& [label, count] : votes)
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    if (best == y[i]) ++correct;
  }
  if (covered == 0) throw InputError("forest_oob_accuracy: no out-of-bag samples");
  return static_cast<double>(correct) / static_cast<double>(covered);
}

// ---------------------------------------------------------------------------

Committee build_committee(const Matd& X, const std::vector<int>& y, int k, uint64_t seed,
                          const LogisticConfig& cfg) {
  if (k < 1 || k % 2 == 0) throw ConfigError("build_committee: committee size must be odd");
  const long n = X.rows();
  if (n == 0) throw InputError("build_committee: empty training set");
  Committee committee;
  committee.members.reserve(static_cast<size_t>(k));
  for (int m = 0; m < k; ++m) {
    Rng rng(seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(m + 1));
    Matd Xb(n, X.cols());
    std::vector<int> yb(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      long src = rng.uniform_int(n);
      Xb.row(i) = X.row(src);
      yb[static_cast<size_t>(i)] = y[static_cast<size_t>(src)];
    }
    committee.members.push_back(train_logistic(Xb, yb, cfg));
  }
  return committee;
}

int committee_vote(const Committee& committee, const Vecd& x) {
  int positive = 0;
  for (const LinearModel& m : committee.members)
    if (predict_logistic(m, x) > 0.5) ++positive;
  return 2 * positive > static_cast<int>(committee.members.size()) ? 1 : 0;
}

double disagreement(const Committee& committee, const Vecd& x) {
  if (committee.members.empty()) throw InputError("disagreement: empty committee");
  int positive = 0;
  for (const LinearModel& m : committee.members)
    if (predict_logistic(m, x) > 0.5) ++positive;
  double p = static_cast<double>(positive) / static_cast<double>(committee.members.size());
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

std::vector<std::string> select_queries(const Committee& committee, const std::vector<PoolItem>& pool,
                                        int n) {
  if (static_cast<int>(pool.size()) < n)
    throw InputError(strfmt("select_queries: pool of %zu smaller than n=%d", pool.size(), n));
  std::vector<std::pair<double, const PoolItem*>> scored;
  scored.reserve(pool.size());
  for (const PoolItem& item : pool) scored.emplace_back(disagreement(committee, item.features), &item);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(scored[static_cast<size_t>(i)].second->id);
  return out;
}

std::pair<bool, bool> majority_vote(const std::vector<bool>& votes) {
  if (votes.size() != 3) throw InputError(strfmt("majority_vote: expected 3 votes, got %zu", votes.size()));
  int positive = static_cast<int>(votes[0]) + static_cast<int>(votes[1]) + static_cast<int>(votes[2]);
  bool label = positive >= 2;
  bool unanimous = positive == 0 || positive == 3;
  return {label, unanimous};
}

BinaryMetrics binary_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw DimensionError("binary_metrics: size mismatch");
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_pred[i] == 1 && y_true[i] == 1) ++tp;
    if (y_pred[i] == 1 && y_true[i] == 0) ++fp;
    if (y_pred[i] == 0 && y_true[i] == 1) ++fn;
    if (y_pred[i] == 0 && y_true[i] == 0) ++tn;
  }
  BinaryMetrics m;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.accuracy = y_true.empty() ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(y_true.size());
  return m;
}

}  // namespace storyq
