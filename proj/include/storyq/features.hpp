// BoW, TF-IDF, DBoW, and the 26 auxiliary features.
#pragma once

#include "storyq/corpus.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace storyq {

class Vocabulary {
 public:
  Vocabulary() = default;

  // Insertion order follows first appearance across the token lists, so the
  // index assignment is deterministic given corpus order.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs_tokens);

  int size() const { return static_cast<int>(words_.size()); }
  size_t n_docs() const { return n_docs_; }
  const std::vector<std::string>& words() const { return words_; }
  int index_of(const std::string& word) const;  // -1 when absent
  int doc_frequency(int index) const { return df_[static_cast<size_t>(index)]; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> df_;
  size_t n_docs_ = 0;
};

// Sparse counts as sorted (index, count) pairs.
struct BowVector {
  int dim = 0;
  std::vector<std::pair<int, double>> entries;

  Vecd dense() const {
    Vecd v = Vecd::Zero(dim);
    for (const auto& [i, c] : entries) v[i] = c;
    return v;
  }
  double sum() const {
    double s = 0;
    for (const auto& [i, c] : entries) s += c;
    return s;
  }
};

BowVector bow_counts(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Component j = tf(j,d) * ln(N / (1 + df_j)) with raw term frequency.
std::vector<Vecd> tf_idf(const std::vector<std::vector<std::string>>& docs_tokens,
                         const Vocabulary& vocab);

// Distributed bag of words: the sum of all token embeddings.
Vecd dbow(const std::vector<std::string>& tokens, const EmbeddingTable& table);

// 21 lexicon categories, order of first appearance in the file.
class Lexicon {
 public:
  static constexpr int kCategories = 21;

  static Lexicon load(const std::string& path);
  static Lexicon from_pairs(const std::vector<std::pair<std::string, std::string>>& category_word);

  const std::vector<std::string>& categories() const { return categories_; }
  // category hit counts over a token sequence, length kCategories
  Vecd category_counts(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> categories_;
  std::unordered_map<std::string, std::vector<int>> word_categories_;
};

constexpr int kAuxDim = 26;

// 21 category counts over the answer tokens followed by
// [views, ln(1+views), n_images, n_words, n_grammar_errors].
Vecd aux_features(const Document& doc, const Lexicon& lexicon);

}  // namespace storyq
