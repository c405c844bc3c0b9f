#include "storyq/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace storyq {

using json = nlohmann::json;

long parse_upvote_display(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t");
  size_t end = s.find_last_not_of(" \t");
  if (begin == std::string::npos) throw ParseError("empty upvote display string");
  std::string t = s.substr(begin, end - begin + 1);

  bool thousands = false;
  if (t.back() == 'k' || t.back() == 'K') {
    thousands = true;
    t.pop_back();
  }
  if (t.empty()) throw ParseError("malformed upvote display string '" + s + "'");
  size_t dot = t.find('.');
  std::string int_part = dot == std::string::npos ? t : t.substr(0, dot);
  std::string frac_part = dot == std::string::npos ? "" : t.substr(dot + 1);
  if (dot != std::string::npos && !thousands)
    throw ParseError("malformed upvote display string '" + s + "' (decimal without k suffix)");
  auto all_digits = [](const std::string& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  if (!all_digits(int_part) || (dot != std::string::npos && !all_digits(frac_part)))
    throw ParseError("malformed upvote display string '" + s + "'");

  double value = std::stod(int_part + (frac_part.empty() ? "" : "." + frac_part));
  if (thousands) value *= 1000.0;
  return std::llround(value);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return tokens;
}

EmbeddingTable::EmbeddingTable(int dimension, const std::vector<std::string>& stopwords, uint64_t seed)
    : dim_(dimension) {
  if (dimension <= 0) throw ConfigError("embedding dimension must be positive");
  stopwords_.insert(stopwords.begin(), stopwords.end());
  Rng rng(seed);
  stopword_vector_ = Vecd(dim_);
  for (int i = 0; i < dim_; ++i) stopword_vector_[i] = rng.uniform(-0.5, 0.5);
  unknown_vector_ = Vecd::Zero(dim_);
}

void EmbeddingTable::add(const std::string& word, Vecd vec) {
  if (vec.size() != dim_)
    throw DimensionError(strfmt("embedding for '%s' has length %ld, expected %d", word.c_str(),
                                static_cast<long>(vec.size()), dim_));
  auto [it, inserted] = index_.emplace(word, vectors_.size());
  if (inserted)
    vectors_.push_back(std::move(vec));
  else
    vectors_[it->second] = std::move(vec);
}

const Vecd& EmbeddingTable::lookup(const std::string& word) const {
  if (stopwords_.count(word)) return stopword_vector_;
  auto it = index_.find(word);
  if (it == index_.end()) return unknown_vector_;
  return vectors_[it->second];
}

std::vector<std::string> load_stopwords(const std::string& path) {
  std::vector<std::string> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stopword file '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

EmbeddingTable load_embeddings(const std::string& path, const std::string& stopword_path,
                               uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file '" + path + "'");
  std::vector<std::string> stopwords = load_stopwords(stopword_path);

  std::string line;
  long line_no = 0;
  int dim = -1;
  EmbeddingTable table;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);

    if (first) {
      first = false;
      // optional "count dim" header: the first field is numeric and exactly
      // one value follows
      bool word_numeric = !word.empty() && word.find_first_not_of("0123456789") == std::string::npos;
      if (word_numeric && values.size() == 1) {
        dim = static_cast<int>(values[0]);
        if (dim <= 0) throw ParseError(strfmt("embedding file line %ld: non-positive dimension", line_no));
        table = EmbeddingTable(dim, stopwords, seed);
        continue;
      }
    }
    if (values.empty()) throw ParseError(strfmt("embedding file line %ld: no vector values", line_no));
    if (dim < 0) {
      dim = static_cast<int>(values.size());
      table = EmbeddingTable(dim, stopwords, seed);
    }
    if (static_cast<int>(values.size()) != dim)
      throw ParseError(strfmt("embedding file line %ld: expected %d values, found %zu", line_no, dim,
                              values.size()));
    Vecd vec(dim);
    for (int i = 0; i < dim; ++i) vec[i] = values[static_cast<size_t>(i)];
    table.add(word, std::move(vec));
  }
  if (dim < 0) throw ParseError("embedding file '" + path + "' contains no vectors");
  return table;
}

std::vector<std::pair<long, long>> region_windows(long answer_len, int k_reg, int k_tok) {
  if (k_reg < 1 || k_tok < 1) throw ConfigError("region_windows: k_reg and k_tok must be >= 1");
  std::vector<std::pair<long, long>> windows;
  windows.reserve(static_cast<size_t>(k_reg));
  for (int p = 0; p < k_reg; ++p) {
    long lo = std::llround(static_cast<double>(static_cast<long>(p) * answer_len) / k_reg);
    long hi = std::llround(static_cast<double>(static_cast<long>(p + 1) * answer_len) / k_reg);
    long part_len = hi - lo;
    if (part_len >= k_tok) {
      long start = lo + (part_len - k_tok) / 2;
      windows.emplace_back(start, start + k_tok);
    } else {
      windows.emplace_back(lo, hi);  // short partition, left aligned
    }
  }
  return windows;
}

RegionGrid split_regions(const std::vector<std::string>& answer_tokens,
                         const std::vector<std::string>& question_tokens, int k_reg, int k_tok,
                         const EmbeddingTable& table) {
  const int D = table.dimension();
  RegionGrid grid;
  grid.regions = Tensord({k_reg + 1, k_tok, D});
  grid.mask.assign(static_cast<size_t>(k_reg + 1) * static_cast<size_t>(k_tok), 0);

  auto fill = [&](int region, const std::vector<std::string>& tokens, long from, long to) {
    for (long i = from; i < to; ++i) {
      const Vecd& vec = table.lookup(tokens[static_cast<size_t>(i)]);
      int slot = static_cast<int>(i - from);
      for (int d = 0; d < D; ++d) grid.regions(region, slot, d) = vec[d];
      grid.mask[static_cast<size_t>(region) * static_cast<size_t>(k_tok) + static_cast<size_t>(slot)] = 1;
    }
  };

  long q_take = std::min<long>(static_cast<long>(question_tokens.size()), k_tok);
  fill(0, question_tokens, 0, q_take);

  auto windows = region_windows(static_cast<long>(answer_tokens.size()), k_reg, k_tok);
  for (int p = 0; p < k_reg; ++p) fill(p + 1, answer_tokens, windows[static_cast<size_t>(p)].first,
                                       windows[static_cast<size_t>(p)].second);
  return grid;
}

std::vector<Document> filter_corpus(const std::vector<Document>& docs, long min_words, long min_views) {
  std::vector<Document> out;
  for (const Document& d : docs) {
    long words = static_cast<long>(tokenize(d.answer_text).size());
    if (words >= min_words && d.views >= min_views) out.push_back(d);
  }
  return out;
}

int count_syllables(const std::string& word) {
  auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };
  int groups = 0;
  bool in_group = false;
  for (char c : word) {
    if (is_vowel(static_cast<char>(std::tolower(static_cast<unsigned char>(c))))) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  // silent final e, except after 'l' where it forms its own syllable
  if (word.size() > 2 && std::tolower(static_cast<unsigned char>(word.back())) == 'e' &&
      std::tolower(static_cast<unsigned char>(word[word.size() - 2])) != 'l' && groups > 1)
    --groups;
  return std::max(groups, 1);
}

double readability_grade(const std::string& text) {
  long sentences = 0;
  long words = 0;
  long syllables = 0;
  std::string segment;
  auto flush_segment = [&] {
    std::vector<std::string> toks = tokenize(segment);
    long seg_words = 0;
    for (const std::string& t : toks) {
      bool has_alnum = std::any_of(t.begin(), t.end(),
                                   [](unsigned char c) { return std::isalnum(c); });
      if (!has_alnum) continue;
      ++seg_words;
      syllables += count_syllables(t);
    }
    if (seg_words > 0) ++sentences;
    words += seg_words;
    segment.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') {
      flush_segment();
    } else {
      segment.push_back(c);
    }
  }
  flush_segment();
  if (words == 0) return 0.0;
  if (sentences == 0) sentences = 1;
  return 0.39 * (static_cast<double>(words) / sentences) +
         11.8 * (static_cast<double>(syllables) / words) - 15.59;
}

CorpusStats corpus_stats(const std::vector<Document>& docs) {
  if (docs.empty()) throw InputError("corpus_stats: empty corpus");
  std::vector<double> upvotes, lengths;
  upvotes.reserve(docs.size());
  lengths.reserve(docs.size());
  double grade_sum = 0.0;
  for (const Document& d : docs) {
    upvotes.push_back(static_cast<double>(d.upvotes));
    lengths.push_back(static_cast<double>(tokenize(d.answer_text).size()));
    grade_sum += readability_grade(d.answer_text);
  }
  CorpusStats s;
  s.n_docs = docs.size();
  s.upvote_mean = mean_of(upvotes);
  s.upvote_median = median_of(upvotes);
  s.upvote_std = stddev_of(upvotes);
  s.upvote_q10 = quantile_of(upvotes, 0.10);
  s.upvote_q90 = quantile_of(upvotes, 0.90);
  s.length_mean = mean_of(lengths);
  s.length_median = median_of(lengths);
  s.length_std = stddev_of(lengths);
  s.length_q10 = quantile_of(lengths, 0.10);
  s.length_q90 = quantile_of(lengths, 0.90);
  s.readability_grade = grade_sum / static_cast<double>(docs.size());
  return s;
}

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(strfmt("corpus file line %ld: %s", line_no, e.what()));
    }
    Document d;
    try {
      d.id = j.at("id").get<std::string>();
      d.question_text = j.at("question").get<std::string>();
      d.answer_text = j.at("answer").get<std::string>();
      d.topic = j.value("topic", std::string());
      const json& up = j.at("upvotes");
      if (up.is_string())
        d.upvotes = parse_upvote_display(up.get<std::string>());
      else
        d.upvotes = up.get<long>();
      d.views = j.at("views").get<long>();
      d.n_images = j.value("n_images", 0);
      d.n_grammar_errors = j.value("n_grammar_errors", 0);
      if (j.contains("story_label") && !j.at("story_label").is_null())
        d.story_label = j.at("story_label").get<bool>();
    } catch (const json::exception& e) {
      throw ParseError(strfmt("corpus file line %ld: %s", line_no, e.what()));
    }
    if (d.upvotes < 0 || d.views < 0)
      throw ParseError(strfmt("corpus file line %ld: negative upvotes or views", line_no));
    if (d.answer_text.empty()) continue;  // ingestion filtering
    docs.push_back(std::move(d));
  }
  return docs;
}

void save_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write corpus file '" + path + "'");
  for (const Document& d : docs) {
    json j;
    j["id"] = d.id;
    j["question"] = d.question_text;
    j["answer"] = d.answer_text;
    j["topic"] = d.topic;
    j["upvotes"] = d.upvotes;
    j["views"] = d.views;
    j["n_images"] = d.n_images;
    j["n_grammar_errors"] = d.n_grammar_errors;
    if (d.story_label) j["story_label"] = *d.story_label;
    out << j.dump() << "\n";
  }
}

}  // namespace storyq
