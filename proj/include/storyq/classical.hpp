// Logistic regression, lasso, CART random forests, bagging committees, and
// query-by-committee selection.
#pragma once

#include "storyq/common.hpp"

#include <string>
#include <vector>

namespace storyq {

struct LinearModel {
  Vecd weights;
  double bias = 0.0;
  std::string regularization = "none";  // none | l1 | l2
  double reg_strength = 0.0;
};

struct LogisticConfig {
  double l2 = 0.0;
  int epochs = 300;
  double lr = 0.5;
  uint64_t seed = 0;
};

// Full-batch gradient ascent on the mean log-likelihood of
// P(y=1|x) = sigmoid(w'x + b), minus an optional L2 penalty on the weights.
LinearModel train_logistic(const Matd& X, const std::vector<int>& y, const LogisticConfig& cfg = {});

double predict_logistic(const LinearModel& model, const Vecd& x);

double logistic_nll(const LinearModel& model, const Matd& X, const std::vector<int>& y);

// Coordinate descent on (1/2n)||y - Xw - b||^2 + lambda*||w||_1 with an
// unpenalized intercept; stops when the largest coordinate change in a sweep
// drops below tol.
LinearModel train_lasso(const Matd& X, const Vecd& y, double lambda = 0.01, double tol = 1e-8,
                        int max_sweeps = 100000);

double predict_linear(const LinearModel& model, const Vecd& x);

double lasso_objective(const LinearModel& model, const Matd& X, const Vecd& y, double lambda);

// ---------------------------------------------------------------------------

enum class ForestTask { classify, regress };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;  // leaf: majority class or mean target
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(const Vecd& x) const;
};

struct ForestModel {
  ForestTask task = ForestTask::classify;
  std::vector<DecisionTree> trees;
  std::vector<std::vector<int>> bootstrap;  // per-tree sample indices (for OOB)
  uint64_t seed = 0;

  double predict(const Vecd& x) const;
};

// CART with Gini impurity (classify) or variance reduction (regress),
// sqrt(d) features considered per split, grown until pure or fewer than two
// samples.
ForestModel train_forest(const Matd& X, const Vecd& y, int n_trees, ForestTask task, uint64_t seed);

// Fraction of samples whose out-of-bag majority vote matches the label.
double forest_oob_accuracy(const ForestModel& forest, const Matd& X, const Vecd& y);

// ---------------------------------------------------------------------------

struct Committee {
  std::vector<LinearModel> members;
};

// k logistic classifiers trained on bootstrap resamples; k must be odd so a
// majority always exists.
Committee build_committee(const Matd& X, const std::vector<int>& y, int k, uint64_t seed,
                          const LogisticConfig& cfg = {});

int committee_vote(const Committee& committee, const Vecd& x);  // majority label

// Vote entropy -p ln p - (1-p) ln(1-p) with p the fraction voting positive.
double disagreement(const Committee& committee, const Vecd& x);

struct PoolItem {
  std::string id;
  Vecd features;
};

// The n pool items with highest disagreement; ties break by id ascending.
std::vector<std::string> select_queries(const Committee& committee, const std::vector<PoolItem>& pool,
                                        int n);

// Exactly three votes; returns (majority label, unanimous flag).
std::pair<bool, bool> majority_vote(const std::vector<bool>& votes);

struct BinaryMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
};

// Positive class is "story" (label 1).
BinaryMetrics binary_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred);

}  // namespace storyq
