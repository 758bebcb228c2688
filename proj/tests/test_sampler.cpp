#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "ibtm/error.hpp"
#include "ibtm/sampler.hpp"

using namespace ibtm;

namespace {

TopicDistributions one_topic_on(std::size_t word, std::size_t V) {
  TopicDistributions t;
  t.shared_words = Matrix(1, V, 0.0);
  t.shared_words(0, word) = 1.0;
  t.private_words = Matrix(0, V);
  t.shared_labels = Matrix(1, 2, 0.5);
  t.private_labels = Matrix(0, 2);
  return t;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("a one-hot single topic emits one word") {
    std::mt19937_64 rng(1);
    auto doc = sample_document(one_topic_on(3, 6), 200, 5, HyperParams{}, rng);
    CHECK(doc.words.size() == 200);
    CHECK(doc.labels.size() == 5);
    for (auto w : doc.words) CHECK(w == 3);
    CHECK(doc.word_share == 1.0);
    CHECK(doc.private_word_tokens == 0);
  }

  TEST_CASE("a share prior near one leaves no private words") {
    auto topics = peaked_topics({2, 2, 1, 20, 6}, 0.9);
    HyperParams h;
    h.word_share = {1e6, 1e-6};
    std::mt19937_64 rng(2);
    const std::size_t n = 100000;
    std::size_t priv = 0;
    for (std::size_t d = 0; d < 100; ++d) priv += sample_document(topics, n / 100, 0, h, rng).private_word_tokens;
    // Binomial bound with p = E[1 - rho] = b / (a + b).
    const double p = 1e-6 / (1e6 + 1e-6);
    CHECK(static_cast<double>(priv) <= n * p + 3.0 * std::sqrt(n * p * (1 - p)) + 0.5);
  }

  TEST_CASE("a flat topic mixture gives the law-of-total-probability marginal") {
    TopicDistributions t;
    t.shared_words = Matrix(2, 4, 0.0);
    t.shared_words(0, 0) = t.shared_words(0, 1) = 0.5;
    t.shared_words(1, 2) = t.shared_words(1, 3) = 0.5;
    t.private_words = Matrix(0, 4);
    t.shared_labels = Matrix(2, 1, 1.0);
    t.private_labels = Matrix(0, 1);
    HyperParams h;
    h.alpha_shared = 1e6;  // theta close to (1/2, 1/2)
    std::mt19937_64 rng(3);
    std::vector<double> hist(4, 0.0);
    const std::size_t docs = 200, per_doc = 500;
    for (std::size_t d = 0; d < docs; ++d)
      for (auto w : sample_document(t, per_doc, 0, h, rng).words) hist[w] += 1;
    const double n = docs * per_doc;
    const double sd = std::sqrt(0.25 * 0.75 / n);
    for (double c : hist) CHECK(std::fabs(c / n - 0.25) < 3 * sd);
  }

  TEST_CASE("private fraction follows the share prior") {
    auto topics = peaked_topics({3, 2, 2, 25, 10}, 0.8);
    HyperParams h;
    h.word_share = {3.0, 1.0};  // E[rho] = 0.75
    std::mt19937_64 rng(4);
    double priv = 0, total = 0;
    for (int d = 0; d < 4000; ++d) {
      auto s = sample_document(topics, 20, 0, h, rng);
      priv += static_cast<double>(s.private_word_tokens);
      total += 20;
    }
    // rho varies per document: per-document variance of the private count is
    // n p(1-p) + n(n-1) Var[rho], with Var[Beta(3,1)] = 3/80.
    const double var_doc = 20 * 0.25 * 0.75 + 20 * 19 * 3.0 / 80.0;
    const double sd = std::sqrt(4000 * var_doc) / total;
    CHECK(std::fabs(priv / total - 0.25) < 3 * sd);
  }

  TEST_CASE("tiny concentrations still give valid draws") {
    auto topics = peaked_topics({3, 2, 2, 12, 6}, 0.5);
    HyperParams h;
    h.alpha_shared = h.alpha_word_private = h.alpha_label_private = 1e-300;
    h.word_share = {1e-300, 1e-300};
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
      auto s = sample_document(topics, 10, 3, h, rng);
      CHECK(std::accumulate(s.shared_weights.begin(), s.shared_weights.end(), 0.0) ==
            doctest::Approx(1.0));
      CHECK(s.word_share >= 0.0);
      CHECK(s.word_share <= 1.0);
      for (auto w : s.words) CHECK(w < 12);
    }
  }

  TEST_CASE("rows must be distributions") {
    auto t = one_topic_on(0, 3);
    t.shared_words(0, 1) = 0.2;
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(sample_document(t, 1, 0, HyperParams{}, rng), InvalidArgument);
    CHECK_THROWS_AS(peaked_topics({2, 0, 0, 4, 4}, 1.5), InvalidArgument);
  }

  TEST_CASE("peaked topics put the peak on disjoint blocks") {
    const ModelDims dims{5, 2, 2, 50, 20};
    auto t = peaked_topics(dims, 0.9);
    CHECK_NOTHROW(t.validate());
    CHECK(t.dims() == dims);
    // 7 word blocks of width 7; shared row k peaks on [7k, 7k+7), private row t on [7(5+t), ...).
    CHECK(t.shared_words(1, 7) > 0.1);
    CHECK(t.shared_words(1, 0) < 0.01);
    CHECK(t.private_words(0, 35) > 0.1);
    CHECK(t.private_labels(1, 12) > 0.1);  // label blocks are 20 / 7 = 2 wide
  }

  TEST_CASE("count_tokens") {
    CHECK(count_tokens({4, 1, 4, 4, 0}) == std::vector<TokenCount>{{0, 1}, {1, 1}, {4, 3}});
    CHECK(count_tokens({}).empty());
  }

  TEST_CASE("each synthetic topic block is one drawing region") {
    const ModelDims dims{5, 2, 2, 50, 20};
    auto vocab = synthetic_location_vocab(dims);
    REQUIRE(vocab.size() == 50);
    std::vector<DrawingPoint> all;
    for (std::size_t block = 0; block < 7; ++block) {
      std::vector<DrawingPoint> pts;
      for (std::size_t w = 7 * block; w < 7 * block + 7; ++w) pts.push_back(vocab.unembed(w));
      CHECK(count_regions(pts).n == 1);
      all.insert(all.end(), pts.begin(), pts.end());
    }
    // The last word spills into the last block's site.
    CHECK(count_regions(all).n == 7);
    for (std::size_t w = 0; w < 50; ++w) CHECK(vocab.nearest(vocab.centroids[w]) == w);
  }

  TEST_CASE("synthesize_corpus") {
    const ModelDims dims{5, 2, 2, 50, 20};
    auto topics = peaked_topics(dims, 0.9);
    auto vocab = synthetic_location_vocab(dims);
    std::mt19937_64 rng(6);
    SyntheticCorpusOptions opt;
    auto corpus = synthesize_corpus(topics, vocab, HyperParams{}, opt, rng);
    REQUIRE(corpus.size() == 500);
    CHECK(corpus.documents[0].id == "doc_000");
    CHECK(corpus.documents[499].id == "doc_499");
    std::set<std::string> names;
    for (const auto& d : corpus.documents) {
      CHECK(d.points.size() == 60);
      CHECK(!d.labels.empty());
      CHECK(d.labels.size() <= 3);
      for (const auto& l : d.labels) names.insert(l);
      for (const auto& p : d.points) CHECK_NOTHROW(validate_point(p, "p"));
    }
    for (const auto& n : names) CHECK(n.rfind("label_", 0) == 0);
    CHECK(synthetic_label_name(7) == "label_07");
    CHECK(synthetic_label_name(123) == "label_123");

    std::mt19937_64 a(9), b(9);
    opt.documents = 10;
    CHECK(synthesize_corpus(topics, vocab, HyperParams{}, opt, a) ==
          synthesize_corpus(topics, vocab, HyperParams{}, opt, b));
  }
}
