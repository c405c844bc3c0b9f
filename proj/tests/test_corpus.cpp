#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "storyq/corpus.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace storyq;

TEST_CASE("parse_upvote_display handles plain and k-suffixed strings") {
  CHECK(parse_upvote_display("2.2k") == 2200);
  CHECK(parse_upvote_display("11") == 11);
  CHECK(parse_upvote_display("0") == 0);
  CHECK(parse_upvote_display("2k") == 2000);
  CHECK(parse_upvote_display("2.25K") == 2250);
  CHECK(parse_upvote_display(" 42 ") == 42);
}

TEST_CASE("parse_upvote_display rejects malformed strings and names the value") {
  CHECK_THROWS_AS(parse_upvote_display("abc"), ParseError);
  CHECK_THROWS_AS(parse_upvote_display(""), ParseError);
  CHECK_THROWS_AS(parse_upvote_display("1.5"), ParseError);  // decimal needs the k suffix
  CHECK_THROWS_AS(parse_upvote_display("2.k"), ParseError);
  CHECK_THROWS_AS(parse_upvote_display("-3"), ParseError);
  try {
    parse_upvote_display("12x");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("12x") != std::string::npos);
  }
}

TEST_CASE("tokenize lowercases and separates punctuation") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("Alice wired 20 million.") ==
        std::vector<std::string>{"alice", "wired", "20", "million", "."});
  CHECK(tokenize("don't") == std::vector<std::string>{"don", "'", "t"});
  CHECK(tokenize("  a\t b\nc ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize is stable under join-retokenize") {
  Rng rng(7);
  const std::string charset = "abcXYZ019.,!' \t";
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    long len = rng.uniform_int(60);
    for (long i = 0; i < len; ++i)
      text.push_back(charset[static_cast<size_t>(rng.uniform_int(static_cast<long>(charset.size())))]);
    std::vector<std::string> tokens = tokenize(text);
    std::string joined;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i) joined += ' ';
      joined += tokens[i];
    }
    CHECK(tokenize(joined) == tokens);
  }
}

TEST_CASE("load_embeddings reads vectors, stopwords, and unknowns") {
  std::string emb = testutil::tmp_path("emb.txt");
  std::string stop = testutil::tmp_path("stop.txt");
  testutil::write_file(emb, "alpha 1 2 3\nbeta 4 5 6\n");
  testutil::write_file(stop, "the\nof\n");

  EmbeddingTable table = load_embeddings(emb, stop, 99);
  CHECK(table.dimension() == 3);
  CHECK(table.vocab_size() == 2);
  CHECK(table.lookup("alpha")[1] == 2.0);

  SUBCASE("unseen word maps to the unknown vector") {
    CHECK(table.lookup("nope") == table.unknown_vector());
    CHECK(table.unknown_vector().norm() == 0.0);
  }
  SUBCASE("distinct stop words share one vector") {
    CHECK(table.lookup("the") == table.lookup("of"));
    CHECK(table.lookup("the") == table.stopword_vector());
    CHECK(table.stopword_vector().norm() > 0.0);
  }
  SUBCASE("header line is accepted") {
    testutil::write_file(emb, "2 3\nalpha 1 2 3\nbeta 4 5 6\n");
    EmbeddingTable t2 = load_embeddings(emb, "", 0);
    CHECK(t2.dimension() == 3);
    CHECK(t2.vocab_size() == 2);
  }
  SUBCASE("inconsistent vector length reports the line number") {
    testutil::write_file(emb, "alpha 1 2 3\nbeta 4 5\n");
    try {
      load_embeddings(emb, "", 0);
      CHECK(false);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
}

namespace {

// table whose word "t<i>" has embedding filled with value i+1
EmbeddingTable index_table(int dim, int n_words) {
  EmbeddingTable table(dim, {}, 0);
  for (int i = 0; i < n_words; ++i)
    table.add("t" + std::to_string(i), Vecd::Constant(dim, static_cast<double>(i + 1)));
  return table;
}

std::vector<std::string> index_tokens(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("t" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("split_regions worked examples") {
  const int D = 2;
  EmbeddingTable table = index_table(D, 520);

  SUBCASE("360 tokens, k_reg=10, k_tok=36: whole partitions, no padding") {
    RegionGrid grid = split_regions(index_tokens(360), {}, 10, 36, table);
    CHECK(grid.n_regions() == 11);
    for (int r = 1; r <= 10; ++r)
      for (int t = 0; t < 36; ++t) {
        CHECK(grid.mask_at(r, t));
        int token = (r - 1) * 36 + t;
        CHECK(grid.regions(r, t, 0) == doctest::Approx(token + 1));
      }
  }
  SUBCASE("500 tokens: partitions of 50, offset 7") {
    RegionGrid grid = split_regions(index_tokens(500), {}, 10, 36, table);
    for (int r = 1; r <= 10; ++r)
      for (int t = 0; t < 36; ++t) {
        CHECK(grid.mask_at(r, t));
        int token = (r - 1) * 50 + 7 + t;
        CHECK(grid.regions(r, t, 0) == doctest::Approx(token + 1));
      }
  }
  SUBCASE("empty answer: fully padded answer regions") {
    RegionGrid grid = split_regions({}, index_tokens(3), 4, 6, table);
    for (int r = 1; r <= 4; ++r)
      for (int t = 0; t < 6; ++t) {
        CHECK_FALSE(grid.mask_at(r, t));
        CHECK(grid.regions(r, t, 0) == 0.0);
        CHECK(grid.regions(r, t, 1) == 0.0);
      }
    CHECK(grid.mask_at(0, 0));
    CHECK(grid.mask_at(0, 2));
    CHECK_FALSE(grid.mask_at(0, 3));
  }
  SUBCASE("question takes the first k_tok tokens") {
    RegionGrid grid = split_regions(index_tokens(10), index_tokens(8), 2, 4, table);
    for (int t = 0; t < 4; ++t) {
      CHECK(grid.mask_at(0, t));
      CHECK(grid.regions(0, t, 0) == doctest::Approx(t + 1));
    }
  }
}

TEST_CASE("split_regions invariants over random shapes") {
  const int D = 3;
  EmbeddingTable table = index_table(D, 1200);
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    int k_reg = 1 + static_cast<int>(rng.uniform_int(8));
    int k_tok = 1 + static_cast<int>(rng.uniform_int(12));
    int len = static_cast<int>(rng.uniform_int(1000));
    int q_len = static_cast<int>(rng.uniform_int(20));
    auto answer = index_tokens(len);
    auto question = index_tokens(q_len);
    RegionGrid grid = split_regions(answer, question, k_reg, k_tok, table);

    REQUIRE(grid.n_regions() == k_reg + 1);
    REQUIRE(grid.k_tok() == k_tok);
    REQUIRE(grid.dim() == D);

    // independently recompute boundary and offset arithmetic
    long mask_count = 0;
    for (int p = 0; p < k_reg; ++p) {
      long lo = std::llround(static_cast<double>(static_cast<long>(p) * len) / k_reg);
      long hi = std::llround(static_cast<double>(static_cast<long>(p + 1) * len) / k_reg);
      long plen = hi - lo;
      long start = plen >= k_tok ? lo + (plen - k_tok) / 2 : lo;
      long take = std::min<long>(plen, k_tok);
      for (int t = 0; t < k_tok; ++t) {
        if (t < take) {
          REQUIRE(grid.mask_at(p + 1, t));
          REQUIRE(grid.regions(p + 1, t, 0) == static_cast<double>(start + t + 1));
          ++mask_count;
        } else {
          REQUIRE_FALSE(grid.mask_at(p + 1, t));
          for (int d = 0; d < D; ++d) REQUIRE(grid.regions(p + 1, t, d) == 0.0);
        }
      }
    }
    long q_take = std::min<long>(q_len, k_tok);
    mask_count += q_take;
    long total_true = 0;
    for (int r = 0; r <= k_reg; ++r)
      for (int t = 0; t < k_tok; ++t)
        if (grid.mask_at(r, t)) ++total_true;
    REQUIRE(total_true == mask_count);
    REQUIRE(total_true <= static_cast<long>(k_reg + 1) * k_tok);

    // deterministic and idempotent
    RegionGrid again = split_regions(answer, question, k_reg, k_tok, table);
    REQUIRE(again.regions.flat() == grid.regions.flat());
    REQUIRE(again.mask == grid.mask);
  }
}

TEST_CASE("filter_corpus applies strict less-than thresholds") {
  auto doc_with = [](int n_words, long views) {
    Document d;
    d.id = "x";
    d.answer_text = [&] {
      std::string s;
      for (int i = 0; i < n_words; ++i) s += "w ";
      return s;
    }();
    d.views = views;
    return d;
  };
  CHECK(filter_corpus({doc_with(49, 1000)}).empty());
  CHECK(filter_corpus({doc_with(50, 50)}).size() == 1);
  CHECK(filter_corpus({doc_with(1000, 49)}).empty());
  CHECK(filter_corpus({}).empty());

  SUBCASE("raising thresholds never adds documents") {
    std::vector<Document> docs;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) docs.push_back(doc_with(1 + rng.uniform_int(100), rng.uniform_int(200)));
    size_t prev = filter_corpus(docs, 0, 0).size();
    for (long threshold : {10L, 30L, 60L, 90L}) {
      size_t now = filter_corpus(docs, threshold, threshold).size();
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("corpus_stats computes moments, quantiles, and readability") {
  auto doc = [](long upvotes, const std::string& answer) {
    Document d;
    d.id = "x";
    d.upvotes = upvotes;
    d.answer_text = answer;
    d.views = 100;
    return d;
  };

  SUBCASE("single doc, one sentence of ten monosyllables") {
    // grade = 0.39*10 + 11.8*1 - 15.59 = 0.11
    CorpusStats s = corpus_stats({doc(5, "cat dog sun hat pot bit map rug din fox.")});
    CHECK(s.readability_grade == doctest::Approx(0.11).epsilon(1e-9));
  }
  SUBCASE("median of {1, 11, 1000} is 11") {
    CorpusStats s = corpus_stats({doc(1, "a b."), doc(11, "a b."), doc(1000, "a b.")});
    CHECK(s.upvote_median == 11.0);
    CHECK(s.upvote_q10 <= s.upvote_median);
    CHECK(s.upvote_median <= s.upvote_q90);
  }
  SUBCASE("empty corpus is an input error") { CHECK_THROWS_AS(corpus_stats({}), InputError); }
}

TEST_CASE("syllable counting uses vowel groups with silent-e correction") {
  CHECK(count_syllables("cat") == 1);
  CHECK(count_syllables("table") == 2);   // ta-ble, final e after consonant group counted via 'le'
  CHECK(count_syllables("make") == 1);    // silent final e
  CHECK(count_syllables("idea") == 2);    // i-dea: vowel groups "i", "ea"
  CHECK(count_syllables("rhythm") == 1);  // y as vowel
  CHECK(count_syllables("20") == 1);      // floor of one syllable
}

TEST_CASE("corpus JSONL round trip and display-string upvotes") {
  std::string path = testutil::tmp_path("corpus.jsonl");
  testutil::write_file(
      path,
      R"({"id":"a","question":"Q?","answer":"Once upon a time.","topic":"t","upvotes":"2.2k","views":100,"n_images":1})"
      "\n"
      R"({"id":"b","question":"Q?","answer":"Another story here.","topic":"t","upvotes":7,"views":55,"story_label":true})"
      "\n"
      R"({"id":"c","question":"Q?","answer":"","topic":"t","upvotes":1,"views":10})"
      "\n");
  std::vector<Document> docs = load_corpus(path);
  REQUIRE(docs.size() == 2);  // empty answer dropped at ingestion
  CHECK(docs[0].upvotes == 2200);
  CHECK(docs[0].n_images == 1);
  CHECK(docs[0].n_grammar_errors == 0);
  CHECK_FALSE(docs[0].story_label.has_value());
  CHECK(docs[1].story_label.value() == true);

  std::string out = testutil::tmp_path("corpus_out.jsonl");
  save_corpus(out, docs);
  std::vector<Document> again = load_corpus(out);
  REQUIRE(again.size() == 2);
  CHECK(again[0].upvotes == 2200);
  CHECK(again[1].story_label.value() == true);

  SUBCASE("malformed line reports its number") {
    testutil::write_file(path, "{\"id\":\"a\"}\n");
    CHECK_THROWS_AS(load_corpus(path), ParseError);
  }
}
