// Dataset splitting, training loops, evaluation, synthetic-corpus
// generation, and the experiment suite.
#pragma once

#include "storyq/classical.hpp"
#include "storyq/distfit.hpp"
#include "storyq/readers.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace storyq {

struct SplitSpec {
  double train = 0.75;
  double val = 0.10;
  double test = 0.15;
  uint64_t seed = 0;
};

struct Split {
  std::vector<Document> train, val, test;
};

// Seeded shuffle, then contiguous cuts at floor(n*f_train) and
// floor(n*(f_train+f_val)).
Split split_dataset(const std::vector<Document>& docs, const SplitSpec& spec);

enum class ModelKind {
  rf,
  lasso,
  rnn_a,
  lstm_a,
  regional,
  sequential_rnn,
  sequential_lstm,
  holistic_rnn,
  holistic_lstm,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_neural(ModelKind kind);

struct ExperimentConfig {
  ModelKind kind = ModelKind::regional;
  ReaderConfig reader;
  OptimizerConfig optimizer;
  int epochs = 100;
  int batch_size = 32;
  uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables clipping; the recurrent baselines default to 1
  std::string precision = "float64";  // float32 | float64
  bool use_question = true;           // ablation: drop the question region
  bool use_answer = true;             // ablation: with use_question=false, aux-features-only MLP
  int rf_trees = 1000;
  double lasso_lambda = 0.01;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct TrainResult {
  nlohmann::json checkpoint;
  std::vector<double> train_mse;  // per epoch, evaluation mode
  std::vector<double> val_mse;
  int best_epoch = 0;  // epoch whose checkpoint is retained (lowest val MSE)
  double best_val_mse = 0.0;
};

// Trains any model kind; neural kinds run minibatch updates for up to
// cfg.epochs epochs and keep the parameters with the lowest validation MSE.
TrainResult train_model(const ExperimentConfig& cfg, const std::vector<Document>& train,
                        const std::vector<Document>& val, const EmbeddingTable& table,
                        const Lexicon& lexicon);

// Mean over the test docs of (ln(upvotes+1) - mu_hat)^2.
double evaluate(const nlohmann::json& checkpoint, const std::vector<Document>& test,
                const EmbeddingTable& table, const Lexicon& lexicon);

void save_checkpoint(const std::string& path, const nlohmann::json& checkpoint);
nlohmann::json load_checkpoint(const std::string& path);

// A 21-category lexicon whose words can never be produced by the tokenizer;
// used when no real lexicon file is supplied.
Lexicon placeholder_lexicon();

// Reduced geometry for gradient verification: k_reg=3, k_tok=6, D=8, D_r=4
// with a shape-valid two-layer conv stack.
ReaderConfig reduced_reader_config();

struct GradCheckSummary {
  std::string model;
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central-difference verification of all seven neural models (five readers
// plus RNN-A/LSTM-A) at the reduced geometry, double precision.
std::vector<GradCheckSummary> run_reader_grad_checks(int n_samples = 200, double eps = 1e-5,
                                                     uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Synthetic corpora with a known upvote-generating function.

struct SyntheticSpec {
  int n_docs = 1000;
  int vocab_size = 200;
  int len_min = 40, len_max = 120;
  std::string signal = "interaction";  // linear | interaction
  double noise = 0.1;
  uint64_t seed = 0;
  int k_reg = 5, k_tok = 8;  // region structure the signal is planted on
  int embed_dim = 16;
  int question_len = 4;
  double target_base = 4.0;  // ln(upvotes+1) offset
  double interaction_gain = 20.0;
  double target_lo = 0.25, target_hi = 8.0;  // clamp range of the ln-scale target
};

struct SyntheticTruth {
  std::vector<double> word_signal;    // per-word scalar signal
  std::vector<double> linear_coeffs;  // per answer region (linear signal)
  int region_i = 0, region_j = 0;     // interacting answer regions (1-based)
  double gain = 0.0;
  std::vector<double> doc_targets;  // exact ln-scale targets before integer rounding
};

struct SyntheticCorpus {
  std::vector<Document> docs;
  EmbeddingTable table;
  SyntheticTruth truth;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Recomputes the planted ln-scale target of one document from the stored
// coefficients (generator self-check and oracle for tests).
double synthetic_target(const SyntheticSpec& spec, const SyntheticTruth& truth, const Document& doc);

// Story/non-story corpus: each document mixes "story" vocabulary at an
// intensity theta; the label is theta > 0.5.
struct StoryTaskSpec {
  int n_docs = 2000;
  int vocab_story = 50, vocab_neutral = 150;
  int len_min = 20, len_max = 60;
  double frac_hard = 0.3;     // theta near the boundary
  double hard_margin = 0.12;  // hard docs: theta in 0.5 +- margin
  int embed_dim = 16;
  uint64_t seed = 0;
};

SyntheticCorpus generate_story_corpus(const StoryTaskSpec& spec);

// Writes the synthetic embedding table in the plain-text word-vector format.
void save_embeddings(const std::string& path, const EmbeddingTable& table,
                     const std::vector<std::string>& words);
std::vector<std::string> synthetic_vocabulary(int vocab_size);
std::vector<std::string> story_vocabulary(const StoryTaskSpec& spec);

// ---------------------------------------------------------------------------

struct SuiteEntry {
  std::string model;
  double mse = 0.0;
  double improvement_pct = 0.0;
  bool ok = false;
  std::string error;
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;
  std::string csv;    // model,mse,improvement_pct
  std::string table;  // aligned text
};

// Runs every config on one shared split and reports MSE plus percent
// improvement over the baseline (the first rf config, else the first config).
SuiteResult run_experiment_suite(const std::vector<ExperimentConfig>& configs,
                                 const std::vector<Document>& docs, const SplitSpec& split_spec,
                                 const EmbeddingTable& table, const Lexicon& lexicon);

}  // namespace storyq
