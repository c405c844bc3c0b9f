// Corpus ingestion: documents, tokenization, embedding tables, region
// splitting, and dataset statistics.
#pragma once

#include "storyq/tensor.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace storyq {

struct Document {
  std::string id;
  std::string question_text;
  std::string answer_text;
  std::string topic;
  long upvotes = 0;
  long views = 0;
  int n_images = 0;
  int n_grammar_errors = 0;
  std::optional<bool> story_label;
};

// Word vectors of a fixed dimension. All stop words share one seeded random
// vector; absent words share the zero unknown vector.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dimension, const std::vector<std::string>& stopwords, uint64_t seed);

  int dimension() const { return dim_; }
  size_t vocab_size() const { return vectors_.size(); }

  void add(const std::string& word, Vecd vec);
  const Vecd& lookup(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  bool is_stopword(const std::string& word) const { return stopwords_.count(word) != 0; }

  const Vecd& stopword_vector() const { return stopword_vector_; }
  const Vecd& unknown_vector() const { return unknown_vector_; }

 private:
  int dim_ = 0;
  std::vector<Vecd> vectors_;
  std::unordered_map<std::string, size_t> index_;
  std::unordered_set<std::string> stopwords_;
  Vecd stopword_vector_;
  Vecd unknown_vector_;
};

// (k_reg+1) x k_tok x D embedding block; region 0 holds the question text.
// Padded cells are all-zero and mask-false.
struct RegionGrid {
  Tensord regions;             // shape (k_reg+1, k_tok, D)
  std::vector<uint8_t> mask;   // (k_reg+1) * k_tok entries, 1 = real token

  int n_regions() const { return regions.dim(0); }
  int k_tok() const { return regions.dim(1); }
  int dim() const { return regions.dim(2); }
  bool mask_at(int region, int tok) const {
    return mask[static_cast<size_t>(region) * static_cast<size_t>(k_tok()) + static_cast<size_t>(tok)] != 0;
  }
};

struct CorpusStats {
  size_t n_docs = 0;
  double upvote_mean = 0, upvote_median = 0, upvote_std = 0, upvote_q10 = 0, upvote_q90 = 0;
  double length_mean = 0, length_median = 0, length_std = 0, length_q10 = 0, length_q90 = 0;
  double readability_grade = 0;
};

// "2.2k" -> 2200, "11" -> 11. Accepts plain digits or digits with an
// optional decimal part followed by k/K.
long parse_upvote_display(const std::string& s);

// Lowercases, splits on whitespace, and separates each punctuation byte into
// its own token. Bytes >= 0x80 are treated as word characters.
std::vector<std::string> tokenize(const std::string& text);

// Plain-text word-vector file: optional "count dim" header, then one line per
// word. Stop words (one per line in stopword_path) are remapped to a single
// seeded random vector.
EmbeddingTable load_embeddings(const std::string& path, const std::string& stopword_path,
                               uint64_t seed = 0);

std::vector<std::string> load_stopwords(const std::string& path);

// Evenly partitions the answer into k_reg pieces (boundary i at
// round(i*L/k_reg)), takes the centered k_tok-token window of each piece
// (offset floor((P-k_tok)/2)), and puts the first k_tok question tokens into
// region 0. Short regions are left-aligned and zero-padded.
RegionGrid split_regions(const std::vector<std::string>& answer_tokens,
                         const std::vector<std::string>& question_tokens, int k_reg, int k_tok,
                         const EmbeddingTable& table);

// Window positions only (token index ranges per region), shared by the grid
// builder and the synthetic-corpus generator.
std::vector<std::pair<long, long>> region_windows(long answer_len, int k_reg, int k_tok);

std::vector<Document> filter_corpus(const std::vector<Document>& docs, long min_words = 50,
                                    long min_views = 50);

CorpusStats corpus_stats(const std::vector<Document>& docs);

// Flesch-Kincaid grade of one text with vowel-group syllable counting and
// sentence splits on . ! ?
double readability_grade(const std::string& text);
int count_syllables(const std::string& word);

// JSON Lines corpus file. Documents with empty answers after parsing are
// dropped. Throws ParseError on malformed lines.
std::vector<Document> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Document>& docs);

}  // namespace storyq
