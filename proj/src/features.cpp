#include "storyq/features.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace storyq {

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs_tokens) {
  Vocabulary v;
  v.n_docs_ = docs_tokens.size();
  for (const auto& tokens : docs_tokens) {
    std::set<int> seen;
    for (const std::string& t : tokens) {
      auto [it, inserted] = v.index_.emplace(t, static_cast<int>(v.words_.size()));
      if (inserted) {
        v.words_.push_back(t);
        v.df_.push_back(0);
      }
      seen.insert(it->second);
    }
    for (int idx : seen) v.df_[static_cast<size_t>(idx)] += 1;
  }
  return v;
}

int Vocabulary::index_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

BowVector bow_counts(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<int, double> counts;
  for (const std::string& t : tokens) {
    int idx = vocab.index_of(t);
    if (idx >= 0) counts[idx] += 1.0;
  }
  BowVector out;
  out.dim = vocab.size();
  out.entries.assign(counts.begin(), counts.end());
  return out;
}

std::vector<Vecd> tf_idf(const std::vector<std::vector<std::string>>& docs_tokens,
                         const Vocabulary& vocab) {
  if (docs_tokens.empty()) throw InputError("tf_idf: empty corpus");
  const double n = static_cast<double>(docs_tokens.size());
  Vecd idf(vocab.size());
  for (int j = 0; j < vocab.size(); ++j)
    idf[j] = std::log(n / (1.0 + static_cast<double>(vocab.doc_frequency(j))));
  std::vector<Vecd> out;
  out.reserve(docs_tokens.size());
  for (const auto& tokens : docs_tokens) {
    Vecd v = bow_counts(tokens, vocab).dense();
    out.push_back(v.cwiseProduct(idf));
  }
  return out;
}

Vecd dbow(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
  Vecd sum = Vecd::Zero(table.dimension());
  for (const std::string& t : tokens) sum += table.lookup(t);
  return sum;
}

Lexicon Lexicon::from_pairs(const std::vector<std::pair<std::string, std::string>>& category_word) {
  Lexicon lex;
  std::unordered_map<std::string, int> cat_index;
  for (const auto& [category, word] : category_word) {
    auto [it, inserted] = cat_index.emplace(category, static_cast<int>(lex.categories_.size()));
    if (inserted) lex.categories_.push_back(category);
    lex.word_categories_[word].push_back(it->second);
  }
  if (static_cast<int>(lex.categories_.size()) != kCategories)
    throw ParseError(strfmt("lexicon must define exactly %d categories, found %zu", kCategories,
                            lex.categories_.size()));
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open lexicon file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(strfmt("lexicon file line %ld: expected 'category<TAB>word'", line_no));
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return from_pairs(pairs);
}

Vecd Lexicon::category_counts(const std::vector<std::string>& tokens) const {
  Vecd counts = Vecd::Zero(kCategories);
  for (const std::string& t : tokens) {
    auto it = word_categories_.find(t);
    if (it == word_categories_.end()) continue;
    for (int cat : it->second) counts[cat] += 1.0;
  }
  return counts;
}

Vecd aux_features(const Document& doc, const Lexicon& lexicon) {
  std::vector<std::string> tokens = tokenize(doc.answer_text);
  Vecd f(kAuxDim);
  f.head(Lexicon::kCategories) = lexicon.category_counts(tokens);
  f[21] = static_cast<double>(doc.views);
  f[22] = std::log1p(static_cast<double>(doc.views));
  f[23] = static_cast<double>(doc.n_images);
  f[24] = static_cast<double>(tokens.size());
  f[25] = static_cast<double>(doc.n_grammar_errors);
  return f;
}

}  // namespace storyq
