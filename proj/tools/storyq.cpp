// storyq command line: corpus ingestion, story classification, active
// learning, distribution fitting, and the reader training pipeline.
#include "storyq/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace storyq;
using json = nlohmann::json;

namespace {

struct EmbeddingArgs {
  std::string path;
  std::string stopwords;
  uint64_t seed = 0;
};

void add_embedding_options(CLI::App* cmd, EmbeddingArgs& args, bool required) {
  auto* opt = cmd->add_option("--embeddings", args.path, "word-vector file");
  if (required) opt->required();
  cmd->add_option("--stopwords", args.stopwords, "stopword list, one token per line");
  cmd->add_option("--embedding-seed", args.seed, "seed for the shared stopword vector");
}

EmbeddingTable load_table(const EmbeddingArgs& args) {
  if (args.path.empty()) return EmbeddingTable(1, {}, args.seed);
  return load_embeddings(args.path, args.stopwords, args.seed);
}

Lexicon load_lexicon_or_placeholder(const std::string& path) {
  if (path.empty()) return placeholder_lexicon();
  return Lexicon::load(path);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

std::vector<double> upvote_values(const std::vector<Document>& docs) {
  std::vector<double> values;
  values.reserve(docs.size());
  for (const Document& d : docs) values.push_back(static_cast<double>(d.upvotes));
  return values;
}

enum class FeatureKind { bow, tfidf, dbow_kind };

FeatureKind parse_features(const std::string& name) {
  if (name == "bow") return FeatureKind::bow;
  if (name == "tfidf") return FeatureKind::tfidf;
  if (name == "dbow") return FeatureKind::dbow_kind;
  throw ConfigError("features must be bow, tfidf, or dbow");
}

// feature matrix over all docs in corpus order
Matd classifier_features(const std::vector<Document>& docs, FeatureKind kind,
                         const EmbeddingTable& table) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(docs.size());
  for (const Document& d : docs) tokens.push_back(tokenize(d.answer_text));
  if (kind == FeatureKind::dbow_kind) {
    Matd X(static_cast<long>(docs.size()), table.dimension());
    for (size_t i = 0; i < docs.size(); ++i)
      X.row(static_cast<long>(i)) = dbow(tokens[i], table).transpose();
    return X;
  }
  Vocabulary vocab = Vocabulary::build(tokens);
  if (kind == FeatureKind::tfidf) {
    auto vecs = tf_idf(tokens, vocab);
    Matd X(static_cast<long>(docs.size()), vocab.size());
    for (size_t i = 0; i < docs.size(); ++i) X.row(static_cast<long>(i)) = vecs[i].transpose();
    return X;
  }
  Matd X(static_cast<long>(docs.size()), vocab.size());
  for (size_t i = 0; i < docs.size(); ++i)
    X.row(static_cast<long>(i)) = bow_counts(tokens[i], vocab).dense().transpose();
  return X;
}

std::string fit_results_csv(const std::vector<FitResult>& fits) {
  std::string csv = "family,params,nll,n_params,bic,status\n";
  for (const FitResult& r : fits) {
    std::string params;
    for (size_t i = 0; i < r.params.size(); ++i) {
      if (i) params += ";";
      params += strfmt("%.12g", r.params[i]);
    }
    if (r.ok)
      csv += strfmt("%s,%s,%.6f,%d,%.6f,ok\n", r.family.c_str(), params.c_str(), r.nll, r.n_params,
                    r.bic);
    else
      csv += strfmt("%s,,,%d,,failed: %s\n", r.family.c_str(), r.n_params, r.error.c_str());
  }
  return csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"story quality prediction toolkit"};
  app.require_subcommand(1);

  // ingest ----------------------------------------------------------------
  std::string in_path, out_path;
  long min_words = 50, min_views = 50;
  auto* ingest = app.add_subcommand("ingest", "parse, filter, and normalize a JSONL corpus");
  ingest->add_option("--in", in_path, "input corpus (JSON Lines)")->required();
  ingest->add_option("--out", out_path, "filtered corpus output")->required();
  ingest->add_option("--min-words", min_words, "minimum answer word count");
  ingest->add_option("--min-views", min_views, "minimum view count");
  ingest->callback([&] {
    std::vector<Document> docs = load_corpus(in_path);
    std::vector<Document> kept = filter_corpus(docs, min_words, min_views);
    save_corpus(out_path, kept);
    std::cout << strfmt("ingested %zu documents, kept %zu after filtering\n", docs.size(), kept.size());
  });

  // stats -----------------------------------------------------------------
  std::string stats_csv;
  auto* stats = app.add_subcommand("stats", "corpus statistics and readability");
  stats->add_option("--in", in_path, "input corpus")->required();
  stats->add_option("--csv", stats_csv, "optional CSV output path");
  stats->callback([&] {
    CorpusStats s = corpus_stats(load_corpus(in_path));
    std::string text;
    text += strfmt("documents          %zu\n", s.n_docs);
    text += strfmt("upvotes  mean %.4f median %.4f std %.4f q10 %.4f q90 %.4f\n", s.upvote_mean,
                   s.upvote_median, s.upvote_std, s.upvote_q10, s.upvote_q90);
    text += strfmt("length   mean %.4f median %.4f std %.4f q10 %.4f q90 %.4f\n", s.length_mean,
                   s.length_median, s.length_std, s.length_q10, s.length_q90);
    text += strfmt("readability grade  %.4f\n", s.readability_grade);
    std::cout << text;
    if (!stats_csv.empty()) {
      std::string csv = "metric,value\n";
      csv += strfmt("n_docs,%zu\n", s.n_docs);
      csv += strfmt("upvote_mean,%.6f\nupvote_median,%.6f\nupvote_std,%.6f\n", s.upvote_mean,
                    s.upvote_median, s.upvote_std);
      csv += strfmt("upvote_q10,%.6f\nupvote_q90,%.6f\n", s.upvote_q10, s.upvote_q90);
      csv += strfmt("length_mean,%.6f\nlength_median,%.6f\nlength_std,%.6f\n", s.length_mean,
                    s.length_median, s.length_std);
      csv += strfmt("length_q10,%.6f\nlength_q90,%.6f\n", s.length_q10, s.length_q90);
      csv += strfmt("readability_grade,%.6f\n", s.readability_grade);
      write_text(stats_csv, csv);
    }
  });

  // classify-stories --------------------------------------------------------
  std::string features_name = "bow";
  EmbeddingArgs cls_emb;
  int committee_size = 11;
  uint64_t cls_seed = 0;
  double cls_l2 = 1e-4, cls_lr = 0.5;
  int cls_epochs = 300;
  auto* classify = app.add_subcommand(
      "classify-stories", "train on labeled documents and label the rest by committee majority");
  classify->add_option("--in", in_path, "corpus with story_label on the training subset")->required();
  classify->add_option("--out", out_path, "corpus output with predicted labels")->required();
  classify->add_option("--features", features_name, "bow | tfidf | dbow");
  classify->add_option("--committee", committee_size, "committee size (odd)");
  classify->add_option("--seed", cls_seed, "bagging seed");
  classify->add_option("--l2", cls_l2, "logistic L2 strength");
  classify->add_option("--lr", cls_lr, "logistic learning rate");
  classify->add_option("--epochs", cls_epochs, "logistic epochs");
  add_embedding_options(classify, cls_emb, false);
  classify->callback([&] {
    std::vector<Document> docs = load_corpus(in_path);
    FeatureKind kind = parse_features(features_name);
    if (kind == FeatureKind::dbow_kind && cls_emb.path.empty())
      throw ConfigError("dbow features need --embeddings");
    EmbeddingTable table = load_table(cls_emb);
    Matd X = classifier_features(docs, kind, table);

    Matd X_train(X.rows(), X.cols());
    std::vector<int> y_train;
    long n_train = 0;
    for (size_t i = 0; i < docs.size(); ++i) {
      if (!docs[i].story_label) continue;
      X_train.row(n_train++) = X.row(static_cast<long>(i));
      y_train.push_back(*docs[i].story_label ? 1 : 0);
    }
    if (n_train == 0) throw InputError("classify-stories: no labeled documents");
    X_train.conservativeResize(n_train, X.cols());

    LogisticConfig lcfg{.l2 = cls_l2, .epochs = cls_epochs, .lr = cls_lr, .seed = cls_seed};
    Committee committee = build_committee(X_train, y_train, committee_size, cls_seed, lcfg);

    std::vector<int> train_pred;
    for (size_t i = 0; i < docs.size(); ++i) {
      if (!docs[i].story_label) continue;
      train_pred.push_back(committee_vote(committee, X.row(static_cast<long>(i)).transpose()));
    }
    BinaryMetrics m = binary_metrics(y_train, train_pred);
    std::cout << strfmt("labeled %ld docs: precision %.3f recall %.3f f1 %.3f\n", n_train, m.precision,
                        m.recall, m.f1);

    long labeled = 0;
    for (size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].story_label) continue;
      docs[i].story_label = committee_vote(committee, X.row(static_cast<long>(i)).transpose()) == 1;
      ++labeled;
    }
    save_corpus(out_path, docs);
    std::cout << strfmt("predicted labels for %ld documents -> %s\n", labeled, out_path.c_str());
  });

  // active-learn ------------------------------------------------------------
  std::string labels_path;
  int query_n = 400, round_no = 1;
  auto* active = app.add_subcommand("active-learn",
                                    "select the least-agreement pool items for the next labeling round");
  active->add_option("--in", in_path, "corpus")->required();
  active->add_option("--labels", labels_path, "JSONL {id, votes:[b,b,b]}")->required();
  active->add_option("--out", out_path, "query file output")->required();
  active->add_option("--n", query_n, "number of queries");
  active->add_option("--round", round_no, "round index recorded in the query file");
  active->add_option("--features", features_name, "bow | tfidf | dbow");
  active->add_option("--committee", committee_size, "committee size (odd)");
  active->add_option("--seed", cls_seed, "bagging seed");
  add_embedding_options(active, cls_emb, false);
  active->callback([&] {
    std::vector<Document> docs = load_corpus(in_path);
    std::map<std::string, bool> labels;
    {
      std::ifstream in(labels_path);
      if (!in) throw InputError("cannot open label file '" + labels_path + "'");
      std::string line;
      long line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          json j = json::parse(line);
          std::vector<bool> votes = j.at("votes").get<std::vector<bool>>();
          labels[j.at("id").get<std::string>()] = majority_vote(votes).first;
        } catch (const json::exception& e) {
          throw ParseError(strfmt("label file line %ld: %s", line_no, e.what()));
        }
      }
    }
    FeatureKind kind = parse_features(features_name);
    EmbeddingTable table = load_table(cls_emb);
    Matd X = classifier_features(docs, kind, table);

    Matd X_train(X.rows(), X.cols());
    std::vector<int> y_train;
    long n_train = 0;
    std::vector<PoolItem> pool;
    for (size_t i = 0; i < docs.size(); ++i) {
      auto it = labels.find(docs[i].id);
      if (it != labels.end()) {
        X_train.row(n_train++) = X.row(static_cast<long>(i));
        y_train.push_back(it->second ? 1 : 0);
      } else {
        pool.push_back({docs[i].id, X.row(static_cast<long>(i)).transpose()});
      }
    }
    if (n_train == 0) throw InputError("active-learn: no labeled documents");
    X_train.conservativeResize(n_train, X.cols());

    Committee committee = build_committee(X_train, y_train, committee_size, cls_seed);
    std::vector<std::string> ids = select_queries(committee, pool, query_n);
    json out = {{"round", round_no}, {"ids", ids}};
    write_text(out_path, out.dump() + "\n");
    std::cout << strfmt("selected %zu queries from a pool of %zu -> %s\n", ids.size(), pool.size(),
                        out_path.c_str());
  });

  // fit-dist ----------------------------------------------------------------
  uint64_t fit_seed = 0;
  auto* fitdist = app.add_subcommand("fit-dist", "MLE/EM fits of the upvote distribution with BIC");
  fitdist->add_option("--in", in_path, "corpus")->required();
  fitdist->add_option("--out", out_path, "CSV of fit results")->required();
  fitdist->add_option("--seed", fit_seed, "EM seed");
  fitdist->callback([&] {
    std::vector<FitResult> fits = rank_fits(upvote_values(load_corpus(in_path)), fit_seed);
    std::string csv = fit_results_csv(fits);
    write_text(out_path, csv);
    std::cout << csv;
  });

  // ccdf ---------------------------------------------------------------------
  auto* ccdf_cmd = app.add_subcommand("ccdf", "empirical CCDF of upvotes for log-log plotting");
  ccdf_cmd->add_option("--in", in_path, "corpus")->required();
  ccdf_cmd->add_option("--out", out_path, "CSV of (value, P(X >= value))")->required();
  ccdf_cmd->callback([&] {
    auto points = empirical_ccdf(upvote_values(load_corpus(in_path)));
    std::string csv = "value,p_geq\n";
    for (auto& [v, p] : points) csv += strfmt("%.12g,%.12g\n", v, p);
    write_text(out_path, csv);
    std::cout << strfmt("wrote %zu CCDF points -> %s\n", points.size(), out_path.c_str());
  });

  // split ---------------------------------------------------------------------
  std::string out_prefix;
  SplitSpec split_spec;
  auto* split_cmd = app.add_subcommand("split", "seeded train/val/test split");
  split_cmd->add_option("--in", in_path, "corpus")->required();
  split_cmd->add_option("--out-prefix", out_prefix, "writes <prefix>.train/.val/.test.jsonl")->required();
  split_cmd->add_option("--train", split_spec.train, "train fraction");
  split_cmd->add_option("--val", split_spec.val, "validation fraction");
  split_cmd->add_option("--test", split_spec.test, "test fraction");
  split_cmd->add_option("--seed", split_spec.seed, "shuffle seed");
  split_cmd->callback([&] {
    Split split = split_dataset(load_corpus(in_path), split_spec);
    save_corpus(out_prefix + ".train.jsonl", split.train);
    save_corpus(out_prefix + ".val.jsonl", split.val);
    save_corpus(out_prefix + ".test.jsonl", split.test);
    std::cout << strfmt("split sizes: train %zu val %zu test %zu\n", split.train.size(),
                        split.val.size(), split.test.size());
  });

  // train ----------------------------------------------------------------------
  std::string config_path, train_path, val_path, curve_path, lexicon_path, kind_flag;
  EmbeddingArgs train_emb;
  std::optional<int> opt_epochs, opt_batch, opt_rf_trees;
  std::optional<uint64_t> opt_seed;
  std::optional<double> opt_lr, opt_clip, opt_lasso;
  std::optional<std::string> opt_precision;
  std::optional<bool> opt_use_question, opt_use_answer;
  auto* train_cmd = app.add_subcommand("train", "train one model and write its checkpoint");
  train_cmd->add_option("--config", config_path, "experiment config JSON");
  train_cmd->add_option("--train", train_path, "training corpus")->required();
  train_cmd->add_option("--val", val_path, "validation corpus")->required();
  train_cmd->add_option("--out", out_path, "checkpoint output")->required();
  train_cmd->add_option("--curve", curve_path, "per-epoch MSE curve CSV");
  train_cmd->add_option("--lexicon", lexicon_path, "21-category lexicon TSV");
  train_cmd->add_option("--kind", kind_flag, "model kind (overrides config)");
  train_cmd->add_option("--epochs", opt_epochs, "override epochs");
  train_cmd->add_option("--batch-size", opt_batch, "override batch size");
  train_cmd->add_option("--seed", opt_seed, "override seed");
  train_cmd->add_option("--lr", opt_lr, "override learning rate");
  train_cmd->add_option("--clip-norm", opt_clip, "override gradient clipping");
  train_cmd->add_option("--precision", opt_precision, "float32 | float64");
  train_cmd->add_option("--use-question", opt_use_question, "include the question region");
  train_cmd->add_option("--use-answer", opt_use_answer, "include the answer text");
  train_cmd->add_option("--rf-trees", opt_rf_trees, "override forest size");
  train_cmd->add_option("--lasso-lambda", opt_lasso, "override lasso regularization");
  add_embedding_options(train_cmd, train_emb, false);
  train_cmd->callback([&] {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw InputError("cannot open config '" + config_path + "'");
      json j;
      in >> j;
      cfg = experiment_config_from_json(j);
    } else if (kind_flag.empty()) {
      throw ConfigError("train needs --config or --kind");
    }
    if (!kind_flag.empty()) cfg.kind = model_kind_from_string(kind_flag);
    if (opt_epochs) cfg.epochs = *opt_epochs;
    if (opt_batch) cfg.batch_size = *opt_batch;
    if (opt_seed) cfg.seed = *opt_seed;
    if (opt_lr) cfg.optimizer.lr = *opt_lr;
    if (opt_clip) cfg.clip_norm = *opt_clip;
    if (opt_precision) cfg.precision = *opt_precision;
    if (opt_use_question) cfg.use_question = *opt_use_question;
    if (opt_use_answer) cfg.use_answer = *opt_use_answer;
    if (opt_rf_trees) cfg.rf_trees = *opt_rf_trees;
    if (opt_lasso) cfg.lasso_lambda = *opt_lasso;

    EmbeddingTable table = load_table(train_emb);
    Lexicon lexicon = load_lexicon_or_placeholder(lexicon_path);
    TrainResult result =
        train_model(cfg, load_corpus(train_path), load_corpus(val_path), table, lexicon);
    save_checkpoint(out_path, result.checkpoint);
    if (!curve_path.empty()) {
      std::string csv = "epoch,train_mse,val_mse\n";
      for (size_t e = 0; e < result.train_mse.size(); ++e)
        csv += strfmt("%zu,%.12g,%.12g\n", e + 1, result.train_mse[e], result.val_mse[e]);
      write_text(curve_path, csv);
    }
    std::cout << strfmt("best epoch %d, validation MSE %.6f -> %s\n", result.best_epoch,
                        result.best_val_mse, out_path.c_str());
  });

  // evaluate ----------------------------------------------------------------
  std::string checkpoint_path, test_path;
  auto* eval_cmd = app.add_subcommand("evaluate", "test-set MSE of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  eval_cmd->add_option("--test", test_path, "test corpus")->required();
  eval_cmd->add_option("--lexicon", lexicon_path, "21-category lexicon TSV");
  add_embedding_options(eval_cmd, train_emb, false);
  eval_cmd->callback([&] {
    EmbeddingTable table = load_table(train_emb);
    Lexicon lexicon = load_lexicon_or_placeholder(lexicon_path);
    double mse = evaluate(load_checkpoint(checkpoint_path), load_corpus(test_path), table, lexicon);
    std::cout << strfmt("test MSE %.6f\n", mse);
  });

  // suite ----------------------------------------------------------------------
  std::string configs_path;
  auto* suite_cmd = app.add_subcommand("suite", "run several configs on one split and report MSEs");
  suite_cmd->add_option("--configs", configs_path, "JSON array of experiment configs")->required();
  suite_cmd->add_option("--in", in_path, "corpus")->required();
  suite_cmd->add_option("--out-prefix", out_prefix, "writes <prefix>.csv and <prefix>.txt")->required();
  suite_cmd->add_option("--lexicon", lexicon_path, "21-category lexicon TSV");
  suite_cmd->add_option("--train", split_spec.train, "train fraction");
  suite_cmd->add_option("--val", split_spec.val, "validation fraction");
  suite_cmd->add_option("--test", split_spec.test, "test fraction");
  suite_cmd->add_option("--seed", split_spec.seed, "split seed");
  add_embedding_options(suite_cmd, train_emb, false);
  suite_cmd->callback([&] {
    std::ifstream in(configs_path);
    if (!in) throw InputError("cannot open configs '" + configs_path + "'");
    json j;
    in >> j;
    std::vector<ExperimentConfig> configs;
    for (const json& item : j) configs.push_back(experiment_config_from_json(item));
    EmbeddingTable table = load_table(train_emb);
    Lexicon lexicon = load_lexicon_or_placeholder(lexicon_path);
    SuiteResult result =
        run_experiment_suite(configs, load_corpus(in_path), split_spec, table, lexicon);
    write_text(out_prefix + ".csv", result.csv);
    write_text(out_prefix + ".txt", result.table);
    std::cout << result.table;
  });

  // gradcheck ---------------------------------------------------------------
  int gc_samples = 200;
  double gc_eps = 1e-5;
  uint64_t gc_seed = 0;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference verification of all neural models");
  gradcheck_cmd->add_option("--samples", gc_samples, "parameter components per model");
  gradcheck_cmd->add_option("--eps", gc_eps, "finite-difference step");
  gradcheck_cmd->add_option("--seed", gc_seed, "seed");
  gradcheck_cmd->callback([&] {
    bool all_ok = true;
    for (const GradCheckSummary& s : run_reader_grad_checks(gc_samples, gc_eps, gc_seed)) {
      bool ok = s.max_rel_err < 1e-4;
      all_ok = all_ok && ok;
      std::cout << strfmt("%-16s max relative error %.3e over %d components  [%s]\n", s.model.c_str(),
                          s.max_rel_err, s.checked, ok ? "ok" : "FAIL");
    }
    if (!all_ok) throw NumericError("gradient check failed");
  });

  // synth ---------------------------------------------------------------------
  SyntheticSpec synth_spec;
  StoryTaskSpec story_spec;
  std::string synth_mode = "regress", emb_out, truth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with a known target");
  synth_cmd->add_option("--out", out_path, "corpus output")->required();
  synth_cmd->add_option("--mode", synth_mode, "regress | story");
  synth_cmd->add_option("--emb-out", emb_out, "write matching embeddings here");
  synth_cmd->add_option("--truth-out", truth_out, "write the generating function here");
  synth_cmd->add_option("--n-docs", synth_spec.n_docs, "number of documents");
  synth_cmd->add_option("--vocab", synth_spec.vocab_size, "vocabulary size (regress mode)");
  synth_cmd->add_option("--signal", synth_spec.signal, "linear | interaction");
  synth_cmd->add_option("--noise", synth_spec.noise, "target noise sigma");
  synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");
  synth_cmd->add_option("--k-reg", synth_spec.k_reg, "answer regions the signal is planted on");
  synth_cmd->add_option("--k-tok", synth_spec.k_tok, "tokens per region");
  synth_cmd->add_option("--embed-dim", synth_spec.embed_dim, "embedding dimension");
  synth_cmd->add_option("--len-min", synth_spec.len_min, "minimum answer length");
  synth_cmd->add_option("--len-max", synth_spec.len_max, "maximum answer length");
  synth_cmd->callback([&] {
    SyntheticCorpus corpus;
    std::vector<std::string> words;
    if (synth_mode == "regress") {
      corpus = generate_synthetic(synth_spec);
      words = synthetic_vocabulary(synth_spec.vocab_size);
    } else if (synth_mode == "story") {
      story_spec.n_docs = synth_spec.n_docs;
      story_spec.seed = synth_spec.seed;
      story_spec.embed_dim = synth_spec.embed_dim;
      corpus = generate_story_corpus(story_spec);
      words = story_vocabulary(story_spec);
    } else {
      throw ConfigError("synth mode must be regress or story");
    }
    save_corpus(out_path, corpus.docs);
    if (!emb_out.empty()) save_embeddings(emb_out, corpus.table, words);
    if (!truth_out.empty()) {
      json truth;
      truth["word_signal"] = corpus.truth.word_signal;
      truth["linear_coeffs"] = corpus.truth.linear_coeffs;
      truth["region_i"] = corpus.truth.region_i;
      truth["region_j"] = corpus.truth.region_j;
      truth["gain"] = corpus.truth.gain;
      truth["doc_targets"] = corpus.truth.doc_targets;
      write_text(truth_out, truth.dump() + "\n");
    }
    std::cout << strfmt("wrote %zu synthetic documents -> %s\n", corpus.docs.size(), out_path.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
