#include "storyq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

namespace storyq {

using json = nlohmann::json;

Split split_dataset(const std::vector<Document>& docs, const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.val > 0 && spec.test > 0))
    throw ConfigError("split_dataset: fractions must be positive");
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw ConfigError("split_dataset: fractions must sum to 1");
  const size_t n = docs.size();
  if (n < 3) throw InputError("split_dataset: need at least 3 documents");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(order);

  const size_t cut1 = static_cast<size_t>(std::floor(static_cast<double>(n) * spec.train));
  const size_t cut2 = static_cast<size_t>(std::floor(static_cast<double>(n) * (spec.train + spec.val)));
  Split split;
  for (size_t i = 0; i < n; ++i) {
    const Document& d = docs[order[i]];
    if (i < cut1)
      split.train.push_back(d);
    else if (i < cut2)
      split.val.push_back(d);
    else
      split.test.push_back(d);
  }
  return split;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::rf: return "rf";
    case ModelKind::lasso: return "lasso";
    case ModelKind::rnn_a: return "rnn_a";
    case ModelKind::lstm_a: return "lstm_a";
    case ModelKind::regional: return "regional";
    case ModelKind::sequential_rnn: return "sequential_rnn";
    case ModelKind::sequential_lstm: return "sequential_lstm";
    case ModelKind::holistic_rnn: return "holistic_rnn";
    case ModelKind::holistic_lstm: return "holistic_lstm";
  }
  throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  for (ModelKind kind : {ModelKind::rf, ModelKind::lasso, ModelKind::rnn_a, ModelKind::lstm_a,
                         ModelKind::regional, ModelKind::sequential_rnn, ModelKind::sequential_lstm,
                         ModelKind::holistic_rnn, ModelKind::holistic_lstm})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown model kind '" + name + "'");
}

bool is_neural(ModelKind kind) { return kind != ModelKind::rf && kind != ModelKind::lasso; }

namespace {

Recurrence reader_recurrence(ModelKind kind) {
  switch (kind) {
    case ModelKind::sequential_rnn:
    case ModelKind::holistic_rnn: return Recurrence::rnn;
    case ModelKind::sequential_lstm:
    case ModelKind::holistic_lstm: return Recurrence::lstm;
    default: return Recurrence::none;
  }
}

Gating reader_gating(ModelKind kind) {
  switch (kind) {
    case ModelKind::sequential_rnn:
    case ModelKind::sequential_lstm: return Gating::sequential;
    case ModelKind::holistic_rnn:
    case ModelKind::holistic_lstm: return Gating::holistic;
    default: return Gating::none;
  }
}

}  // namespace

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["kind"] = to_string(cfg.kind);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["clip_norm"] = cfg.clip_norm;
  j["precision"] = cfg.precision;
  j["use_question"] = cfg.use_question;
  j["use_answer"] = cfg.use_answer;
  j["rf_trees"] = cfg.rf_trees;
  j["lasso_lambda"] = cfg.lasso_lambda;
  j["optimizer"] = {{"kind", cfg.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
                    {"lr", cfg.optimizer.lr},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"eps", cfg.optimizer.eps}};
  json stack = json::array();
  for (const ConvSpec& c : cfg.reader.conv_stack)
    stack.push_back({{"out_channels", c.out_channels},
                     {"kh", c.kh},
                     {"kw", c.kw},
                     {"sh", c.sh},
                     {"sw", c.sw},
                     {"pool", c.pool}});
  j["reader"] = {{"k_reg", cfg.reader.k_reg},
                 {"k_tok", cfg.reader.k_tok},
                 {"embed_dim", cfg.reader.embed_dim},
                 {"region_dim", cfg.reader.region_dim},
                 {"fc_width", cfg.reader.fc_width},
                 {"dropout_rate", cfg.reader.dropout_rate},
                 {"max_words", cfg.reader.max_words},
                 {"baseline_hidden", cfg.reader.baseline_hidden},
                 {"conv_stack", stack}};
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (cfg.kind == ModelKind::rnn_a || cfg.kind == ModelKind::lstm_a) cfg.clip_norm = 1.0;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
  cfg.precision = j.value("precision", cfg.precision);
  cfg.use_question = j.value("use_question", cfg.use_question);
  cfg.use_answer = j.value("use_answer", cfg.use_answer);
  cfg.rf_trees = j.value("rf_trees", cfg.rf_trees);
  cfg.lasso_lambda = j.value("lasso_lambda", cfg.lasso_lambda);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    std::string kind = o.value("kind", "adam");
    if (kind != "adam" && kind != "sgd") throw ConfigError("optimizer kind must be adam or sgd");
    cfg.optimizer.kind = kind == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    cfg.optimizer.lr = o.value("lr", cfg.optimizer.lr);
    cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = o.value("eps", cfg.optimizer.eps);
  }
  if (j.contains("reader")) {
    const json& r = j.at("reader");
    cfg.reader.k_reg = r.value("k_reg", cfg.reader.k_reg);
    cfg.reader.k_tok = r.value("k_tok", cfg.reader.k_tok);
    cfg.reader.embed_dim = r.value("embed_dim", cfg.reader.embed_dim);
    cfg.reader.region_dim = r.value("region_dim", cfg.reader.region_dim);
    cfg.reader.fc_width = r.value("fc_width", cfg.reader.fc_width);
    cfg.reader.dropout_rate = r.value("dropout_rate", cfg.reader.dropout_rate);
    cfg.reader.max_words = r.value("max_words", cfg.reader.max_words);
    cfg.reader.baseline_hidden = r.value("baseline_hidden", cfg.reader.baseline_hidden);
    if (r.contains("conv_stack")) {
      cfg.reader.conv_stack.clear();
      for (const json& c : r.at("conv_stack")) {
        ConvSpec spec;
        spec.out_channels = c.at("out_channels").get<int>();
        spec.kh = c.at("kh").get<int>();
        spec.kw = c.at("kw").get<int>();
        spec.sh = c.value("sh", 1);
        spec.sw = c.value("sw", 1);
        spec.pool = c.value("pool", true);
        cfg.reader.conv_stack.push_back(spec);
      }
    }
  }
  return cfg;
}

Lexicon placeholder_lexicon() {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.emplace_back("Object", "__object__");
  for (int c = 2; c <= Lexicon::kCategories; ++c)
    pairs.emplace_back(strfmt("Category%02d", c), strfmt("__cat%02d__", c));
  return Lexicon::from_pairs(pairs);
}

ReaderConfig reduced_reader_config() {
  ReaderConfig cfg;
  cfg.k_reg = 3;
  cfg.k_tok = 6;
  cfg.embed_dim = 8;
  cfg.region_dim = 4;
  cfg.fc_width = 16;
  cfg.dropout_rate = 0.5;
  cfg.conv_stack = {{4, 3, 3, 1, 1, true}, {3, 2, 2, 1, 1, false}};
  cfg.max_words = 12;
  cfg.baseline_hidden = 5;
  return cfg;
}

std::vector<GradCheckSummary> run_reader_grad_checks(int n_samples, double eps, uint64_t seed) {
  std::vector<GradCheckSummary> out;
  Rng data_rng(seed ^ 0xDA7A);
  ReaderConfig base = reduced_reader_config();

  RegionGrid grid;
  grid.regions = Tensord({base.k_reg + 1, base.k_tok, base.embed_dim});
  grid.mask.assign(static_cast<size_t>(base.k_reg + 1) * static_cast<size_t>(base.k_tok), 1);
  for (long i = 0; i < grid.regions.size(); ++i) grid.regions[i] = data_rng.uniform(-1.0, 1.0);
  Vecd aux(kAuxDim);
  for (int i = 0; i < kAuxDim; ++i) aux[i] = data_rng.uniform(-1.0, 1.0);
  Matd tokens(base.max_words, base.embed_dim);
  for (long i = 0; i < tokens.size(); ++i) tokens.data()[i] = data_rng.uniform(-1.0, 1.0);
  const double target = 2.0;

  const std::pair<const char*, std::pair<Gating, Recurrence>> reader_kinds[] = {
      {"regional", {Gating::none, Recurrence::none}},
      {"sequential_rnn", {Gating::sequential, Recurrence::rnn}},
      {"sequential_lstm", {Gating::sequential, Recurrence::lstm}},
      {"holistic_rnn", {Gating::holistic, Recurrence::rnn}},
      {"holistic_lstm", {Gating::holistic, Recurrence::lstm}},
  };
  uint64_t model_seed = seed + 1;
  for (const auto& [name, wiring] : reader_kinds) {
    ReaderConfig cfg = base;
    cfg.gating = wiring.first;
    cfg.recurrence = wiring.second;
    GatedReader<double> model(cfg, model_seed++);
    ReaderCache<double> cache;
    Rng fwd_rng(seed);
    auto forward = [&]() -> double {
      double mu = model.forward(grid, aux, false, fwd_rng, cache);
      return log_square_loss({mu}, {target});
    };
    auto backward = [&]() -> double {
      double mu = model.forward(grid, aux, false, fwd_rng, cache);
      model.backward(cache, log_square_loss_grad(mu, target));
      return log_square_loss({mu}, {target});
    };
    Rng sample_rng(seed ^ (model_seed * 0x9e3779b97f4a7c15ull));
    GradCheckReport report = grad_check(model.params(), forward, backward, eps, n_samples, sample_rng);
    out.push_back({name, report.max_rel_err, report.checked});
  }

  for (Recurrence cell : {Recurrence::rnn, Recurrence::lstm}) {
    RecurrentBaseline<double> model(base, cell, model_seed++);
    BaselineCache<double> cache;
    Rng fwd_rng(seed);
    auto forward = [&]() -> double {
      double mu = model.forward(tokens, aux, false, fwd_rng, cache);
      return log_square_loss({mu}, {target});
    };
    auto backward = [&]() -> double {
      double mu = model.forward(tokens, aux, false, fwd_rng, cache);
      model.backward(cache, log_square_loss_grad(mu, target));
      return log_square_loss({mu}, {target});
    };
    Rng sample_rng(seed ^ (model_seed * 0x9e3779b97f4a7c15ull));
    GradCheckReport report = grad_check(model.params(), forward, backward, eps, n_samples, sample_rng);
    out.push_back({cell == Recurrence::rnn ? "rnn_a" : "lstm_a", report.max_rel_err, report.checked});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Featurization

namespace {

struct DocFeat {
  std::vector<std::string> answer_tokens;
  std::vector<std::string> question_tokens;
  Vecd aux;  // standardized
  long upvotes = 0;
  double target = 0.0;  // ln(upvotes + 1)
};

struct NeuralData {
  std::vector<DocFeat> docs;
  Vecd aux_mean, aux_std;
};

NeuralData featurize_neural(const std::vector<Document>& docs, const Lexicon& lexicon,
                            const Vecd* mean_in, const Vecd* std_in) {
  NeuralData data;
  data.docs.reserve(docs.size());
  Matd aux_raw(static_cast<long>(docs.size()), kAuxDim);
  for (size_t i = 0; i < docs.size(); ++i) {
    DocFeat f;
    f.answer_tokens = tokenize(docs[i].answer_text);
    f.question_tokens = tokenize(docs[i].question_text);
    f.upvotes = docs[i].upvotes;
    f.target = std::log1p(static_cast<double>(docs[i].upvotes));
    aux_raw.row(static_cast<long>(i)) = aux_features(docs[i], lexicon).transpose();
    data.docs.push_back(std::move(f));
  }
  if (mean_in && std_in) {
    data.aux_mean = *mean_in;
    data.aux_std = *std_in;
  } else {
    data.aux_mean = aux_raw.colwise().mean().transpose();
    data.aux_std = Vecd(kAuxDim);
    for (int c = 0; c < kAuxDim; ++c) {
      double var = (aux_raw.col(c).array() - data.aux_mean[c]).square().mean();
      data.aux_std[c] = var > 0 ? std::sqrt(var) : 1.0;
    }
  }
  for (size_t i = 0; i < docs.size(); ++i) {
    Vecd raw = aux_raw.row(static_cast<long>(i)).transpose();
    data.docs[i].aux = (raw - data.aux_mean).cwiseQuotient(data.aux_std);
  }
  return data;
}

Matd baseline_embeds(const DocFeat& f, const ReaderConfig& cfg, const EmbeddingTable& table) {
  Matd x = Matd::Zero(cfg.max_words, cfg.embed_dim);
  const long m = std::min<long>(static_cast<long>(f.answer_tokens.size()), cfg.max_words);
  for (long t = 0; t < m; ++t) x.row(t) = table.lookup(f.answer_tokens[static_cast<size_t>(t)]).transpose();
  return x;
}

// Unified interface over the reader, the recurrent baselines, and the
// aux-features-only MLP ablation.
template <class S>
class AnyNeural {
 public:
  AnyNeural(const ExperimentConfig& cfg, const EmbeddingTable& table) : cfg_(cfg), table_(&table) {
    ReaderConfig rc = cfg.reader;
    rc.include_question = cfg.use_question;
    if (!cfg.use_answer && cfg.use_question)
      throw ConfigError("question-only ablation is not supported");
    aux_only_ = !cfg.use_answer && !cfg.use_question;
    if (aux_only_) {
      rc_ = rc;
      head_ = std::make_unique<DenseHead<S>>("head", rc.aux_dim, rc.fc_width, rc.dropout_rate);
      params_ = std::make_unique<ParameterSet<S>>();
      Rng rng(cfg.seed);
      head_->init_params(*params_, rng);
    } else if (cfg.kind == ModelKind::rnn_a || cfg.kind == ModelKind::lstm_a) {
      rc.recurrence = Recurrence::none;
      rc.gating = Gating::none;
      rc_ = rc;
      baseline_ = std::make_unique<RecurrentBaseline<S>>(
          rc, cfg.kind == ModelKind::rnn_a ? Recurrence::rnn : Recurrence::lstm, cfg.seed);
    } else {
      rc.recurrence = reader_recurrence(cfg.kind);
      rc.gating = reader_gating(cfg.kind);
      rc_ = rc;
      reader_ = std::make_unique<GatedReader<S>>(rc, cfg.seed);
    }
  }

  double forward(const DocFeat& f, bool training, Rng& rng) {
    if (aux_only_) {
      Tensor<S> input({rc_.aux_dim});
      for (int i = 0; i < rc_.aux_dim; ++i) input[i] = static_cast<S>(f.aux[i]);
      aux_input_ = input;
      return static_cast<double>(head_->forward(*params_, aux_input_, training, rng, aux_cache_));
    }
    if (baseline_) {
      Matd x = baseline_embeds(f, rc_, *table_);
      return baseline_->forward(x, f.aux, training, rng, baseline_cache_);
    }
    RegionGrid grid = split_regions(f.answer_tokens, f.question_tokens, rc_.k_reg, rc_.k_tok, *table_);
    return reader_->forward(grid, f.aux, training, rng, reader_cache_);
  }

  void backward(double dmu) {
    if (aux_only_)
      head_->backward(*params_, aux_cache_, static_cast<S>(dmu));
    else if (baseline_)
      baseline_->backward(baseline_cache_, dmu);
    else
      reader_->backward(reader_cache_, dmu);
  }

  ParameterSet<S>& params() {
    if (aux_only_) return *params_;
    if (baseline_) return baseline_->params();
    return reader_->params();
  }

 private:
  ExperimentConfig cfg_;
  const EmbeddingTable* table_;
  ReaderConfig rc_;
  bool aux_only_ = false;
  std::unique_ptr<GatedReader<S>> reader_;
  ReaderCache<S> reader_cache_;
  std::unique_ptr<RecurrentBaseline<S>> baseline_;
  BaselineCache<S> baseline_cache_;
  std::unique_ptr<DenseHead<S>> head_;
  std::unique_ptr<ParameterSet<S>> params_;
  HeadCache<S> aux_cache_;
  Tensor<S> aux_input_;
};

template <class S>
json tensors_to_json(ParameterSet<S>& params) {
  json j = json::object();
  for (auto& [name, p] : params) {
    json t;
    t["shape"] = p.value.shape();
    std::vector<double> data(static_cast<size_t>(p.value.size()));
    for (long i = 0; i < p.value.size(); ++i) data[static_cast<size_t>(i)] = static_cast<double>(p.value[i]);
    t["data"] = std::move(data);
    j[name] = std::move(t);
  }
  return j;
}

template <class S>
void tensors_from_json(const json& j, ParameterSet<S>& params) {
  for (auto& [name, p] : params) {
    if (!j.contains(name)) throw ParseError("checkpoint missing tensor '" + name + "'");
    const json& t = j.at(name);
    std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    if (shape != p.value.shape())
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                           ", expected " + shape_str(p.value.shape()));
    const json& data = t.at("data");
    if (static_cast<long>(data.size()) != p.value.size())
      throw DimensionError("checkpoint tensor '" + name + "' has wrong element count");
    for (long i = 0; i < p.value.size(); ++i)
      p.value[i] = static_cast<S>(data[static_cast<size_t>(i)].get<double>());
  }
}

template <class S>
double eval_mse(AnyNeural<S>& model, const std::vector<DocFeat>& docs, Rng& rng) {
  double sum = 0.0;
  for (const DocFeat& f : docs) {
    double mu = model.forward(f, false, rng);
    double d = f.target - mu;
    sum += d * d;
  }
  return sum / static_cast<double>(docs.size());
}

template <class S>
TrainResult train_neural(const ExperimentConfig& cfg, const std::vector<Document>& train,
                         const std::vector<Document>& val, const EmbeddingTable& table,
                         const Lexicon& lexicon) {
  if (train.empty() || val.empty()) throw InputError("train_model: empty train or validation set");
  NeuralData train_data = featurize_neural(train, lexicon, nullptr, nullptr);
  NeuralData val_data = featurize_neural(val, lexicon, &train_data.aux_mean, &train_data.aux_std);

  AnyNeural<S> model(cfg, table);
  Rng shuffle_rng(cfg.seed ^ 0x5DEECE66Dull);
  Rng dropout_rng(cfg.seed ^ 0xB5297A4Dull);

  TrainResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  json best_tensors;

  std::vector<size_t> order(train_data.docs.size());
  std::iota(order.begin(), order.end(), 0);

  const int batch = std::max(1, cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (size_t k = start; k < end; ++k) {
        const DocFeat& f = train_data.docs[order[k]];
        double mu = model.forward(f, true, dropout_rng);
        if (!std::isfinite(mu))
          throw NumericError(strfmt("training diverged at epoch %d (non-finite loss)", epoch));
        model.backward(log_square_loss_grad(mu, static_cast<double>(f.upvotes)) * inv);
      }
      if (cfg.clip_norm > 0) clip_gradients(model.params(), cfg.clip_norm);
      optimizer_step(model.params(), cfg.optimizer);
    }
    double train_mse = eval_mse(model, train_data.docs, dropout_rng);
    double val_mse = eval_mse(model, val_data.docs, dropout_rng);
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
      throw NumericError(strfmt("training diverged at epoch %d (non-finite loss)", epoch));
    result.train_mse.push_back(train_mse);
    result.val_mse.push_back(val_mse);
    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      best_tensors = tensors_to_json(model.params());
    }
  }

  json ckpt;
  ckpt["format"] = "storyq-checkpoint-v1";
  ckpt["kind"] = to_string(cfg.kind);
  ckpt["precision"] = cfg.precision;
  ckpt["config"] = experiment_config_to_json(cfg);
  ckpt["aux_mean"] = std::vector<double>(train_data.aux_mean.data(),
                                         train_data.aux_mean.data() + kAuxDim);
  ckpt["aux_std"] =
      std::vector<double>(train_data.aux_std.data(), train_data.aux_std.data() + kAuxDim);
  ckpt["tensors"] = std::move(best_tensors);
  result.checkpoint = std::move(ckpt);
  return result;
}

struct TabularData {
  Matd X;
  Vecd y;
};

std::vector<std::vector<std::string>> tabular_token_lists(const std::vector<Document>& docs,
                                                          bool use_question) {
  std::vector<std::vector<std::string>> lists;
  lists.reserve(docs.size());
  for (const Document& d : docs) {
    std::vector<std::string> toks = tokenize(d.answer_text);
    if (use_question) {
      std::vector<std::string> q = tokenize(d.question_text);
      toks.insert(toks.end(), q.begin(), q.end());
    }
    lists.push_back(std::move(toks));
  }
  return lists;
}

TabularData build_tabular(const std::vector<Document>& docs, const Vocabulary& vocab,
                          const Lexicon& lexicon, bool use_question) {
  auto lists = tabular_token_lists(docs, use_question);
  TabularData data;
  data.X = Matd::Zero(static_cast<long>(docs.size()), vocab.size() + kAuxDim);
  data.y = Vecd(static_cast<long>(docs.size()));
  for (size_t i = 0; i < docs.size(); ++i) {
    Vecd bow = bow_counts(lists[i], vocab).dense();
    data.X.row(static_cast<long>(i)).head(vocab.size()) = bow.transpose();
    data.X.row(static_cast<long>(i)).tail(kAuxDim) = aux_features(docs[i], lexicon).transpose();
    data.y[static_cast<long>(i)] = std::log1p(static_cast<double>(docs[i].upvotes));
  }
  return data;
}

json forest_to_json(const ForestModel& forest) {
  json j;
  j["task"] = forest.task == ForestTask::regress ? "regress" : "classify";
  json trees = json::array();
  for (const DecisionTree& tree : forest.trees) {
    json t;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const TreeNode& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    t["feature"] = feature;
    t["threshold"] = threshold;
    t["left"] = left;
    t["right"] = right;
    t["value"] = value;
    trees.push_back(std::move(t));
  }
  j["trees"] = std::move(trees);
  return j;
}

ForestModel forest_from_json(const json& j) {
  ForestModel forest;
  forest.task = j.at("task").get<std::string>() == "regress" ? ForestTask::regress : ForestTask::classify;
  for (const json& t : j.at("trees")) {
    DecisionTree tree;
    auto feature = t.at("feature").get<std::vector<int>>();
    auto threshold = t.at("threshold").get<std::vector<double>>();
    auto left = t.at("left").get<std::vector<int>>();
    auto right = t.at("right").get<std::vector<int>>();
    auto value = t.at("value").get<std::vector<double>>();
    for (size_t i = 0; i < feature.size(); ++i) {
      TreeNode n;
      n.feature = feature[i];
      n.threshold = threshold[i];
      n.left = left[i];
      n.right = right[i];
      n.value = value[i];
      tree.nodes.push_back(n);
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

TrainResult train_tabular(const ExperimentConfig& cfg, const std::vector<Document>& train,
                          const std::vector<Document>& val, const Lexicon& lexicon) {
  if (train.empty()) throw InputError("train_model: empty training set");
  Vocabulary vocab = Vocabulary::build(tabular_token_lists(train, cfg.use_question));
  TabularData train_data = build_tabular(train, vocab, lexicon, cfg.use_question);
  TabularData val_data = build_tabular(val, vocab, lexicon, cfg.use_question);

  json ckpt;
  ckpt["format"] = "storyq-checkpoint-v1";
  ckpt["kind"] = to_string(cfg.kind);
  ckpt["config"] = experiment_config_to_json(cfg);
  ckpt["vocab"] = vocab.words();

  TrainResult result;
  auto mse_of = [](const Matd& X, const Vecd& y, const std::function<double(const Vecd&)>& predict) {
    double sum = 0.0;
    for (long i = 0; i < X.rows(); ++i) {
      double d = y[i] - predict(X.row(i).transpose());
      sum += d * d;
    }
    return sum / static_cast<double>(X.rows());
  };

  if (cfg.kind == ModelKind::rf) {
    ForestModel forest = train_forest(train_data.X, train_data.y, cfg.rf_trees, ForestTask::regress,
                                      cfg.seed);
    ckpt["forest"] = forest_to_json(forest);
    result.train_mse.push_back(
        mse_of(train_data.X, train_data.y, [&](const Vecd& x) { return forest.predict(x); }));
    result.val_mse.push_back(
        mse_of(val_data.X, val_data.y, [&](const Vecd& x) { return forest.predict(x); }));
  } else {
    LinearModel model = train_lasso(train_data.X, train_data.y, cfg.lasso_lambda);
    ckpt["linear"] = {{"weights", std::vector<double>(model.weights.data(),
                                                      model.weights.data() + model.weights.size())},
                      {"bias", model.bias}};
    result.train_mse.push_back(
        mse_of(train_data.X, train_data.y, [&](const Vecd& x) { return predict_linear(model, x); }));
    result.val_mse.push_back(
        mse_of(val_data.X, val_data.y, [&](const Vecd& x) { return predict_linear(model, x); }));
  }
  result.best_epoch = 1;
  result.best_val_mse = result.val_mse[0];
  result.checkpoint = std::move(ckpt);
  return result;
}

}  // namespace

TrainResult train_model(const ExperimentConfig& cfg, const std::vector<Document>& train,
                        const std::vector<Document>& val, const EmbeddingTable& table,
                        const Lexicon& lexicon) {
  if (!is_neural(cfg.kind)) return train_tabular(cfg, train, val, lexicon);
  if (cfg.precision == "float32") return train_neural<float>(cfg, train, val, table, lexicon);
  if (cfg.precision == "float64") return train_neural<double>(cfg, train, val, table, lexicon);
  throw ConfigError("precision must be float32 or float64");
}

namespace {

template <class S>
double evaluate_neural(const json& checkpoint, const std::vector<Document>& test,
                       const EmbeddingTable& table, const Lexicon& lexicon) {
  ExperimentConfig cfg = experiment_config_from_json(checkpoint.at("config"));
  Vecd mean(kAuxDim), sd(kAuxDim);
  auto mean_v = checkpoint.at("aux_mean").get<std::vector<double>>();
  auto std_v = checkpoint.at("aux_std").get<std::vector<double>>();
  for (int i = 0; i < kAuxDim; ++i) {
    mean[i] = mean_v[static_cast<size_t>(i)];
    sd[i] = std_v[static_cast<size_t>(i)];
  }
  NeuralData data = featurize_neural(test, lexicon, &mean, &sd);
  AnyNeural<S> model(cfg, table);
  tensors_from_json(checkpoint.at("tensors"), model.params());
  Rng rng(0);
  return eval_mse(model, data.docs, rng);
}

}  // namespace

double evaluate(const json& checkpoint, const std::vector<Document>& test, const EmbeddingTable& table,
                const Lexicon& lexicon) {
  if (test.empty()) throw InputError("evaluate: empty test set");
  ModelKind kind = model_kind_from_string(checkpoint.at("kind").get<std::string>());
  if (is_neural(kind)) {
    std::string precision = checkpoint.value("precision", "float64");
    return precision == "float32" ? evaluate_neural<float>(checkpoint, test, table, lexicon)
                                  : evaluate_neural<double>(checkpoint, test, table, lexicon);
  }
  ExperimentConfig cfg = experiment_config_from_json(checkpoint.at("config"));
  Vocabulary vocab;
  {
    // rebuild the vocabulary with the checkpointed word order
    std::vector<std::vector<std::string>> lists;
    for (const auto& w : checkpoint.at("vocab")) lists.push_back({w.get<std::string>()});
    vocab = Vocabulary::build(lists);
  }
  TabularData data = build_tabular(test, vocab, lexicon, cfg.use_question);
  double sum = 0.0;
  if (kind == ModelKind::rf) {
    ForestModel forest = forest_from_json(checkpoint.at("forest"));
    for (long i = 0; i < data.X.rows(); ++i) {
      double d = data.y[i] - forest.predict(data.X.row(i).transpose());
      sum += d * d;
    }
  } else {
    LinearModel model;
    auto weights = checkpoint.at("linear").at("weights").get<std::vector<double>>();
    model.weights = Vecd(static_cast<long>(weights.size()));
    for (size_t i = 0; i < weights.size(); ++i) model.weights[static_cast<long>(i)] = weights[i];
    model.bias = checkpoint.at("linear").at("bias").get<double>();
    for (long i = 0; i < data.X.rows(); ++i) {
      double d = data.y[i] - predict_linear(model, data.X.row(i).transpose());
      sum += d * d;
    }
  }
  return sum / static_cast<double>(data.X.rows());
}

void save_checkpoint(const std::string& path, const json& checkpoint) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out << checkpoint.dump();
}

json load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  json j;
  in >> j;
  if (j.value("format", "") != "storyq-checkpoint-v1")
    throw ParseError("'" + path + "' is not a storyq checkpoint");
  return j;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

std::vector<std::string> synthetic_vocabulary(int vocab_size) {
  std::vector<std::string> words;
  words.reserve(static_cast<size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) words.push_back(strfmt("w%d", i));
  return words;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

double region_signal_mean(const std::vector<std::string>& tokens, const std::pair<long, long>& window,
                          const std::vector<double>& word_signal) {
  if (window.second <= window.first) return 0.0;
  double sum = 0.0;
  for (long i = window.first; i < window.second; ++i) {
    int w = std::stoi(tokens[static_cast<size_t>(i)].substr(1));
    sum += word_signal[static_cast<size_t>(w)];
  }
  return sum / static_cast<double>(window.second - window.first);
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_docs < 1 || spec.vocab_size < 2 || spec.len_min < 1 || spec.len_max < spec.len_min)
    throw ConfigError("generate_synthetic: invalid spec");
  if (spec.signal != "linear" && spec.signal != "interaction")
    throw ConfigError("generate_synthetic: signal must be linear or interaction");
  Rng rng(spec.seed);
  SyntheticCorpus corpus;
  std::vector<std::string> words = synthetic_vocabulary(spec.vocab_size);

  corpus.truth.word_signal.resize(static_cast<size_t>(spec.vocab_size));
  for (double& s : corpus.truth.word_signal) s = rng.uniform(-1.0, 1.0);

  corpus.table = EmbeddingTable(spec.embed_dim, {}, spec.seed ^ 0xE5EEDull);
  for (int w = 0; w < spec.vocab_size; ++w) {
    Vecd v(spec.embed_dim);
    v[0] = corpus.truth.word_signal[static_cast<size_t>(w)];
    for (int d = 1; d < spec.embed_dim; ++d) v[d] = rng.uniform(-0.5, 0.5);
    corpus.table.add(words[static_cast<size_t>(w)], std::move(v));
  }

  if (spec.signal == "linear") {
    corpus.truth.linear_coeffs.resize(static_cast<size_t>(spec.k_reg));
    for (double& c : corpus.truth.linear_coeffs) c = rng.uniform(-2.0, 2.0);
  } else {
    corpus.truth.region_i = std::max(1, spec.k_reg / 3);
    corpus.truth.region_j = std::min(spec.k_reg, 2 * spec.k_reg / 3 + 1);
    if (corpus.truth.region_j <= corpus.truth.region_i)
      corpus.truth.region_j = corpus.truth.region_i + 1;
    corpus.truth.gain = spec.interaction_gain;
  }

  for (int i = 0; i < spec.n_docs; ++i) {
    const long len = spec.len_min + rng.uniform_int(spec.len_max - spec.len_min + 1);
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<size_t>(len));
    for (long t = 0; t < len; ++t)
      tokens.push_back(words[static_cast<size_t>(rng.uniform_int(spec.vocab_size))]);
    std::vector<std::string> q_tokens;
    for (int t = 0; t < spec.question_len; ++t)
      q_tokens.push_back(words[static_cast<size_t>(rng.uniform_int(spec.vocab_size))]);

    auto windows = region_windows(len, spec.k_reg, spec.k_tok);
    double raw = spec.target_base;
    if (spec.signal == "linear") {
      for (int t = 0; t < spec.k_reg; ++t)
        raw += corpus.truth.linear_coeffs[static_cast<size_t>(t)] *
               region_signal_mean(tokens, windows[static_cast<size_t>(t)], corpus.truth.word_signal);
    } else {
      double a = region_signal_mean(tokens, windows[static_cast<size_t>(corpus.truth.region_i - 1)],
                                    corpus.truth.word_signal);
      double b = region_signal_mean(tokens, windows[static_cast<size_t>(corpus.truth.region_j - 1)],
                                    corpus.truth.word_signal);
      raw += corpus.truth.gain * a * b;
    }
    double target = std::clamp(raw + spec.noise * rng.normal(), spec.target_lo, spec.target_hi);
    corpus.truth.doc_targets.push_back(target);

    Document d;
    d.id = strfmt("synth%06d", i);
    d.question_text = join_tokens(q_tokens);
    d.answer_text = join_tokens(tokens);
    d.topic = "synthetic";
    d.upvotes = std::max<long>(0, std::llround(std::exp(target) - 1.0));
    d.views = 50 + rng.uniform_int(10000);
    d.n_images = static_cast<int>(rng.uniform_int(4));
    corpus.docs.push_back(std::move(d));
  }
  return corpus;
}

double synthetic_target(const SyntheticSpec& spec, const SyntheticTruth& truth, const Document& doc) {
  std::vector<std::string> tokens = tokenize(doc.answer_text);
  auto windows = region_windows(static_cast<long>(tokens.size()), spec.k_reg, spec.k_tok);
  double raw = spec.target_base;
  if (spec.signal == "linear") {
    for (int t = 0; t < spec.k_reg; ++t)
      raw += truth.linear_coeffs[static_cast<size_t>(t)] *
             region_signal_mean(tokens, windows[static_cast<size_t>(t)], truth.word_signal);
  } else {
    double a = region_signal_mean(tokens, windows[static_cast<size_t>(truth.region_i - 1)],
                                  truth.word_signal);
    double b = region_signal_mean(tokens, windows[static_cast<size_t>(truth.region_j - 1)],
                                  truth.word_signal);
    raw += truth.gain * a * b;
  }
  return std::clamp(raw, spec.target_lo, spec.target_hi);
}

std::vector<std::string> story_vocabulary(const StoryTaskSpec& spec) {
  std::vector<std::string> words;
  for (int i = 0; i < spec.vocab_story; ++i) words.push_back(strfmt("s%d", i));
  for (int i = 0; i < spec.vocab_neutral; ++i) words.push_back(strfmt("n%d", i));
  return words;
}

SyntheticCorpus generate_story_corpus(const StoryTaskSpec& spec) {
  if (spec.n_docs < 1 || spec.vocab_story < 1 || spec.vocab_neutral < 1)
    throw ConfigError("generate_story_corpus: invalid spec");
  Rng rng(spec.seed);
  SyntheticCorpus corpus;

  corpus.table = EmbeddingTable(spec.embed_dim, {}, spec.seed ^ 0xE5EEDull);
  for (int i = 0; i < spec.vocab_story; ++i) {
    Vecd v(spec.embed_dim);
    v[0] = rng.uniform(0.4, 1.2);
    for (int d = 1; d < spec.embed_dim; ++d) v[d] = rng.uniform(-0.5, 0.5);
    corpus.table.add(strfmt("s%d", i), std::move(v));
  }
  for (int i = 0; i < spec.vocab_neutral; ++i) {
    Vecd v(spec.embed_dim);
    v[0] = rng.uniform(-1.2, -0.4);
    for (int d = 1; d < spec.embed_dim; ++d) v[d] = rng.uniform(-0.5, 0.5);
    corpus.table.add(strfmt("n%d", i), std::move(v));
  }

  for (int i = 0; i < spec.n_docs; ++i) {
    double theta;
    if (rng.uniform() < spec.frac_hard) {
      theta = 0.5 + rng.uniform(-spec.hard_margin, spec.hard_margin);
    } else {
      double u = rng.uniform(0.0, 1.0 - 2.0 * spec.hard_margin);
      theta = u < 0.5 - spec.hard_margin ? u : u + 2.0 * spec.hard_margin;
    }
    const long len = spec.len_min + rng.uniform_int(spec.len_max - spec.len_min + 1);
    std::vector<std::string> tokens;
    for (long t = 0; t < len; ++t) {
      if (rng.uniform() < theta)
        tokens.push_back(strfmt("s%d", static_cast<int>(rng.uniform_int(spec.vocab_story))));
      else
        tokens.push_back(strfmt("n%d", static_cast<int>(rng.uniform_int(spec.vocab_neutral))));
    }
    Document d;
    d.id = strfmt("story%06d", i);
    d.question_text = "what happened";
    d.answer_text = join_tokens(tokens);
    d.topic = "synthetic";
    d.upvotes = rng.uniform_int(100);
    d.views = 50 + rng.uniform_int(1000);
    d.story_label = theta > 0.5;
    corpus.docs.push_back(std::move(d));
    corpus.truth.doc_targets.push_back(theta);
  }
  return corpus;
}

void save_embeddings(const std::string& path, const EmbeddingTable& table,
                     const std::vector<std::string>& words) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write embedding file '" + path + "'");
  out << words.size() << " " << table.dimension() << "\n";
  for (const std::string& w : words) {
    out << w;
    const Vecd& v = table.lookup(w);
    for (int d = 0; d < table.dimension(); ++d) out << " " << strfmt("%.17g", v[d]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------

SuiteResult run_experiment_suite(const std::vector<ExperimentConfig>& configs,
                                 const std::vector<Document>& docs, const SplitSpec& split_spec,
                                 const EmbeddingTable& table, const Lexicon& lexicon) {
  if (configs.empty()) throw InputError("run_experiment_suite: no configs");
  Split split = split_dataset(docs, split_spec);

  SuiteResult result;
  for (const ExperimentConfig& cfg : configs) {
    SuiteEntry entry;
    entry.model = to_string(cfg.kind);
    try {
      TrainResult trained = train_model(cfg, split.train, split.val, table, lexicon);
      entry.mse = evaluate(trained.checkpoint, split.test, table, lexicon);
      entry.ok = true;
    } catch (const std::exception& e) {
      entry.ok = false;
      entry.error = e.what();
    }
    result.entries.push_back(std::move(entry));
  }

  // baseline: first rf entry, else the first one
  const SuiteEntry* baseline = nullptr;
  for (const SuiteEntry& e : result.entries)
    if (e.ok && e.model == "rf") {
      baseline = &e;
      break;
    }
  if (!baseline)
    for (const SuiteEntry& e : result.entries)
      if (e.ok) {
        baseline = &e;
        break;
      }

  for (SuiteEntry& e : result.entries)
    if (e.ok && baseline)
      e.improvement_pct = (baseline->mse - e.mse) / baseline->mse * 100.0;

  std::string csv = "model,mse,improvement_pct,status\n";
  std::string tbl = strfmt("%-18s %12s %14s  %s\n", "model", "mse", "improvement", "status");
  for (const SuiteEntry& e : result.entries) {
    if (e.ok) {
      csv += strfmt("%s,%.6f,%.2f,ok\n", e.model.c_str(), e.mse, e.improvement_pct);
      tbl += strfmt("%-18s %12.6f %13.2f%%  %s\n", e.model.c_str(), e.mse, e.improvement_pct, "ok");
    } else {
      csv += strfmt("%s,,,failed: %s\n", e.model.c_str(), e.error.c_str());
      tbl += strfmt("%-18s %12s %14s  failed: %s\n", e.model.c_str(), "-", "-", e.error.c_str());
    }
  }
  result.csv = std::move(csv);
  result.table = std::move(tbl);
  return result;
}

}  // namespace storyq
