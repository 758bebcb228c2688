#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ibtm/error.hpp"
#include "ibtm/model.hpp"
#include "ibtm/sampler.hpp"
#include "oracles/reference.hpp"
#include "support.hpp"

using namespace ibtm;

namespace {

ModelConfig small_config(std::size_t K, std::size_t T, std::size_t S, std::size_t V, std::size_t L,
                         std::uint64_t seed = 1) {
  ModelConfig c;
  c.dims = {K, T, S, V, L};
  c.seed = seed;
  return c;
}

double row_sum(std::span<const double> r) { return std::accumulate(r.begin(), r.end(), 0.0); }

oracle::RefDoc to_ref(const TokenDoc& d) {
  oracle::RefDoc r;
  for (auto t : d.words) r.words.push_back({t.id, t.count});
  for (auto t : d.labels) r.labels.push_back({t.id, t.count});
  return r;
}

// Globals where shared topic k puts almost all word mass on ids [4k, 4k+4).
GlobalTopics separable_globals(std::size_t K, std::size_t V, std::size_t L) {
  ModelConfig c = small_config(K, 0, 0, V, L);
  c.init_jitter = 0.0;
  std::mt19937_64 rng(0);
  auto g = init_globals(c, rng);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t v = 4 * k; v < 4 * k + 4; ++v) g.shared_words.param(k, v) += 500.0;
  g.refresh();
  return g;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("hyperparameter and config validation") {
    HyperParams h;
    CHECK_NOTHROW(h.validate());
    h.sigma_label_private = 0.0;
    CHECK_THROWS_AS(h.validate(), InvalidArgument);
    h = {};
    h.word_share.b = -1;
    CHECK_THROWS_AS(h.validate(), InvalidArgument);
    auto c = small_config(0, 0, 0, 4, 4);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = small_config(1, 0, 0, 0, 4);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = small_config(1, 0, 0, 4, 0);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK_NOTHROW(small_config(1, 0, 0, 1, 1).validate());
  }

  TEST_CASE("init_globals is seeded, positive and normalizable") {
    auto c = small_config(3, 2, 2, 10, 6);
    std::mt19937_64 r1(5), r2(5);
    auto a = init_globals(c, r1);
    auto b = init_globals(c, r2);
    CHECK(a == b);
    for (const auto* block : {&a.shared_words, &a.private_words, &a.shared_labels, &a.private_labels}) {
      for (double v : block->param.data()) CHECK(v > 0.0);
      auto e = block->expected();
      for (std::size_t r = 0; r < e.rows(); ++r) CHECK(row_sum(e.row(r)) == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(a.shared_words.param(0, 0) >= c.hyper.sigma_word_shared);
    CHECK(a.shared_words.param(0, 0) < c.hyper.sigma_word_shared + c.init_jitter);

    c.init_jitter = 0.0;
    std::mt19937_64 r3(1);
    auto flat = init_globals(c, r3);
    for (std::size_t k = 1; k < 3; ++k)
      CHECK(std::ranges::equal(flat.shared_words.param.row(k), flat.shared_words.param.row(0)));
  }

  TEST_CASE("empty document keeps the priors") {
    auto c = small_config(4, 3, 2, 8, 5);
    std::mt19937_64 rng(0);
    auto g = init_globals(c, rng);
    auto post = e_step_document(TokenDoc{}, g, c.hyper);
    CHECK(post.shared == std::vector<double>(4, c.hyper.alpha_shared));
    CHECK(post.word_private == std::vector<double>(3, c.hyper.alpha_word_private));
    CHECK(post.label_private == std::vector<double>(2, c.hyper.alpha_label_private));
    CHECK(post.word_share == c.hyper.word_share);
  }

  TEST_CASE("single shared topic absorbs every token") {
    auto c = small_config(1, 0, 0, 6, 4);
    std::mt19937_64 rng(0);
    auto g = init_globals(c, rng);
    TokenDoc doc{{{0, 3}, {5, 4}}, {{1, 10}, {2, 10}}};
    auto post = e_step_document(doc, g, c.hyper);
    CHECK(post.shared[0] == doctest::Approx(c.hyper.alpha_shared + 7 + 20).epsilon(1e-14));
  }

  TEST_CASE("a document drawn from one separable topic concentrates on it") {
    auto g = separable_globals(4, 16, 3);
    HyperParams h;
    TokenDoc doc{{{8, 5}, {9, 3}, {10, 2}, {11, 6}}, {}};
    auto post = e_step_document(doc, g, h);
    auto mean = post.shared_mean();
    CHECK(std::max_element(mean.begin(), mean.end()) - mean.begin() == 2);
    CHECK(mean[2] > 0.8);
  }

  TEST_CASE("responsibility rows sum to one and mass is conserved") {
    auto c = small_config(4, 2, 3, 20, 8);
    std::mt19937_64 rng(3);
    auto g = init_globals(c, rng);
    for (const auto& doc : test::random_docs(20, 20, 8, 4, 40, 3, 10)) {
      auto post = e_step_document(doc, g, c.hyper);
      for (std::size_t i = 0; i < post.word_resp.rows(); ++i)
        CHECK(std::fabs(row_sum(post.word_resp.row(i)) - 1.0) < 1e-10);
      for (std::size_t i = 0; i < post.label_resp.rows(); ++i)
        CHECK(std::fabs(row_sum(post.label_resp.row(i)) - 1.0) < 1e-10);
      const double tokens = static_cast<double>(doc.word_total() + doc.label_total());
      const double mass = row_sum(post.shared) - 4 * c.hyper.alpha_shared +
                          row_sum(post.word_private) - 2 * c.hyper.alpha_word_private +
                          row_sum(post.label_private) - 3 * c.hyper.alpha_label_private;
      // gamma and the private parameters lag the final responsibilities by one
      // update, so compare against the Beta parameters which are set together.
      const double share_mass = post.word_share.a + post.word_share.b - c.hyper.word_share.a -
                                c.hyper.word_share.b + post.label_share.a + post.label_share.b -
                                c.hyper.label_share.a - c.hyper.label_share.b;
      CHECK(mass == doctest::Approx(tokens).epsilon(1e-10));
      CHECK(share_mass == doctest::Approx(tokens).epsilon(1e-10));
      for (double v : post.shared) CHECK(v > 0);
    }
  }

  TEST_CASE("out-of-range token ids are rejected") {
    auto c = small_config(2, 1, 1, 5, 3);
    std::mt19937_64 rng(0);
    auto g = init_globals(c, rng);
    CHECK_THROWS_AS(e_step_document(TokenDoc{{{5, 1}}, {}}, g, c.hyper), InvalidArgument);
    CHECK_THROWS_AS(e_step_document(TokenDoc{{}, {{3, 1}}}, g, c.hyper), InvalidArgument);
    std::vector<TokenDoc> docs{TokenDoc{{{7, 1}}, {}}};
    CHECK_THROWS_AS(train(docs, c), InvalidArgument);
  }

  TEST_CASE("m_step arithmetic") {
    auto c = small_config(2, 1, 1, 4, 3);
    std::mt19937_64 rng(0);
    auto g = init_globals(c, rng);

    std::vector<TokenDoc> empty(2);
    std::vector<DocPosterior> posts;
    for (const auto& d : empty) posts.push_back(prior_posterior(d, c.dims, c.hyper));
    m_step(empty, posts, c.hyper, g);
    for (double v : g.shared_words.param.data()) CHECK(v == c.hyper.sigma_word_shared);
    for (double v : g.private_labels.param.data()) CHECK(v == c.hyper.sigma_label_private);

    std::vector<TokenDoc> one{TokenDoc{{{2, 1}}, {}}};
    std::vector<DocPosterior> p1{prior_posterior(one[0], c.dims, c.hyper)};
    p1[0].word_resp(0, 0) = 1.0;
    m_step(one, p1, c.hyper, g);
    CHECK(g.shared_words.param(0, 2) == doctest::Approx(c.hyper.sigma_word_shared + 1));
    CHECK(g.shared_words.param(1, 2) == c.hyper.sigma_word_shared);
  }

  TEST_CASE("m_step mass balance") {
    auto c = small_config(3, 2, 2, 15, 6);
    auto docs = test::random_docs(12, 15, 6, 8, 25, 2, 10);
    std::mt19937_64 rng(2);
    auto g = init_globals(c, rng);
    std::vector<DocPosterior> posts;
    for (const auto& d : docs) posts.push_back(e_step_document(d, g, c.hyper));
    m_step(docs, posts, c.hyper, g);
    for (std::size_t k = 0; k < 3; ++k) {
      double expected = 0.0;
      for (std::size_t d = 0; d < docs.size(); ++d)
        for (std::size_t i = 0; i < docs[d].words.size(); ++i)
          expected += docs[d].words[i].count * posts[d].word_resp(i, k);
      const double got = row_sum(g.shared_words.param.row(k)) - 15 * c.hyper.sigma_word_shared;
      CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("every coordinate block update does not decrease the bound") {
    auto c = small_config(3, 2, 2, 12, 5);
    auto docs = test::random_docs(8, 12, 5, 21, 30, 2, 10);
    std::mt19937_64 rng(4);
    auto g = init_globals(c, rng);
    std::vector<DocPosterior> posts;
    for (const auto& d : docs) posts.push_back(prior_posterior(d, c.dims, c.hyper));
    // Fill responsibilities once so the bound is well defined.
    EStepOptions once{0.0, 1};
    for (std::size_t d = 0; d < docs.size(); ++d) e_step_document(docs[d], g, c.hyper, posts[d], once);
    double prev = elbo(docs, g, posts, c.hyper);
    for (int round = 0; round < 15; ++round) {
      for (std::size_t d = 0; d < docs.size(); ++d) {
        e_step_document(docs[d], g, c.hyper, posts[d], once);
        const double now = elbo(docs, g, posts, c.hyper);
        CHECK(now >= prev - 1e-8 * std::fabs(prev));
        prev = now;
      }
      m_step(docs, posts, c.hyper, g);
      const double now = elbo(docs, g, posts, c.hyper);
      CHECK(now >= prev - 1e-8 * std::fabs(prev));
      prev = now;
    }
  }

  TEST_CASE("training bound is nondecreasing across sweeps") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto c = small_config(4, 2, 2, 30, 10, seed);
      auto docs = test::random_docs(30, 30, 10, 100 + seed, 40, 3, 10);
      auto result = train(docs, c);
      REQUIRE(result.elbo_trace.size() == result.sweeps);
      for (std::size_t i = 1; i < result.elbo_trace.size(); ++i)
        CHECK(result.elbo_trace[i] >= result.elbo_trace[i - 1] - 1e-8 * std::fabs(result.elbo_trace[i - 1]));
      auto e = result.globals.shared_labels.expected();
      for (std::size_t r = 0; r < e.rows(); ++r) CHECK(std::fabs(row_sum(e.row(r)) - 1.0) < 1e-10);
    }
  }

  TEST_CASE("training is deterministic and thread-count independent") {
    auto docs = test::random_docs(25, 20, 6, 9);
    auto c = small_config(3, 1, 1, 20, 6, 42);
    auto a = train(docs, c);
    auto b = train(docs, c);
    c.threads = 3;
    auto t = train(docs, c);
    CHECK(a.globals == b.globals);
    CHECK(a.elbo_trace == b.elbo_trace);
    CHECK(a.globals == t.globals);
    CHECK(a.elbo_trace == t.elbo_trace);
  }

  TEST_CASE("document order does not change the converged bound") {
    auto docs = test::random_docs(30, 24, 8, 77, 30, 2, 10);
    auto c = small_config(3, 2, 2, 24, 8, 3);
    const double base = train(docs, c).elbo_trace.back();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 3; ++i) {
      std::shuffle(docs.begin(), docs.end(), rng);
      const double shuffled = train(docs, c).elbo_trace.back();
      CHECK(std::fabs(shuffled - base) <= 1e-9 * std::fabs(base));
    }
  }

  TEST_CASE("duplicating documents doubles the local terms") {
    auto docs = test::random_docs(6, 10, 4, 5, 20, 2, 10);
    auto c = small_config(2, 1, 1, 10, 4);
    auto result = train(docs, c);
    const double local = elbo(docs, result.globals, result.posteriors, c.hyper) -
                         global_elbo(result.globals, c.hyper);
    auto twice = docs;
    twice.insert(twice.end(), docs.begin(), docs.end());
    auto posts = result.posteriors;
    posts.insert(posts.end(), result.posteriors.begin(), result.posteriors.end());
    const double local2 =
        elbo(twice, result.globals, posts, c.hyper) - global_elbo(result.globals, c.hyper);
    CHECK(local2 == doctest::Approx(2 * local).epsilon(1e-12));
  }

  TEST_CASE("without private topics training matches a reference multimodal LDA") {
    auto docs = test::random_docs(20, 18, 7, 13, 30, 2, 10);
    auto c = small_config(3, 0, 0, 18, 7, 11);
    auto ours = train(docs, c).elbo_trace;
    oracle::Mmlda ref;
    ref.topics = 3;
    ref.words = 18;
    ref.labels = 7;
    ref.seed = 11;
    std::vector<oracle::RefDoc> rdocs;
    for (const auto& d : docs) rdocs.push_back(to_ref(d));
    auto theirs = ref.run(rdocs);
    REQUIRE(ours.size() == theirs.size());
    for (std::size_t i = 0; i < ours.size(); ++i)
      CHECK(std::fabs(ours[i] - theirs[i]) <= 1e-6 * std::fabs(theirs[i]));
  }

  TEST_CASE("without labels training matches a reference LDA") {
    auto docs = test::random_docs(20, 18, 0, 14, 30, 0);
    auto c = small_config(4, 0, 0, 18, 1, 5);
    auto ours = train(docs, c).elbo_trace;
    oracle::Mmlda ref;
    ref.topics = 4;
    ref.words = 18;
    ref.labels = 0;
    ref.seed = 5;
    std::vector<oracle::RefDoc> rdocs;
    for (const auto& d : docs) rdocs.push_back(to_ref(d));
    auto theirs = ref.run(rdocs);
    REQUIRE(ours.size() == theirs.size());
    for (std::size_t i = 0; i < ours.size(); ++i)
      CHECK(std::fabs(ours[i] - theirs[i]) <= 1e-6 * std::fabs(theirs[i]));
  }

  TEST_CASE("one topic: the bound sits just below the exact marginal likelihood") {
    std::vector<TokenDoc> docs = {TokenDoc{{{0, 3}, {2, 1}, {4, 2}}, {{0, 10}}},
                                  TokenDoc{{{1, 2}, {2, 2}}, {{1, 10}, {2, 10}}}};
    auto c = small_config(1, 0, 0, 5, 3);
    auto result = train(docs, c);
    std::vector<oracle::RefDoc> rdocs{to_ref(docs[0]), to_ref(docs[1])};
    const double exact = oracle::dirichlet_multinomial_log_marginal(rdocs, 5, 3, 0.6, 0.6);
    const double bound = result.elbo_trace.back();
    CHECK(bound <= exact + 1e-9 * std::fabs(exact));
    CHECK(exact - bound < 0.05 * std::fabs(exact));
  }

  TEST_CASE("a strong share prior on all-shared data keeps q(rho) near one") {
    // Words only from a block the private topic never sees in the truth.
    auto docs = test::random_docs(30, 12, 4, 31, 40, 2, 10);
    auto c = small_config(3, 2, 2, 12, 4, 1);
    c.hyper.word_share = {1000.0, 1.0};
    auto result = train(docs, c);
    for (const auto& p : result.posteriors)
      CHECK(p.word_share.a / (p.word_share.a + p.word_share.b) > 0.95);
  }

  TEST_CASE("word-topic init separates private word topics by label association") {
    const ModelDims dims{2, 1, 1, 15, 8};
    const auto truth = peaked_topics(dims, 0.9);
    std::mt19937_64 rng(5);
    std::vector<TokenDoc> docs;
    for (int d = 0; d < 200; ++d) {
      auto s = sample_document(truth, 40, 3, HyperParams{}, rng);
      docs.push_back(scale_label_counts({count_tokens(s.words), count_tokens(s.labels)}, 10));
    }
    ModelConfig c;
    c.dims = dims;
    c.seed = 3;
    std::mt19937_64 r1(3), r2(3);
    const auto g = word_topic_init(docs, c, r1);
    CHECK(g == word_topic_init(docs, c, r2));
    CHECK(g.dims() == dims);
    // truth: words [10, 15) are the private block
    const auto pw = g.private_words.expected();
    CHECK(std::accumulate(pw.row(0).begin() + 10, pw.row(0).end(), 0.0) > 0.7);
    for (double v : g.shared_labels.param.data()) CHECK(v >= c.hyper.sigma_label_shared);
    for (double v : g.private_labels.param.data()) CHECK(v < c.hyper.sigma_label_private + c.init_jitter);

    auto unlabeled = docs;
    for (auto& d : unlabeled) d.labels.clear();
    std::mt19937_64 r3(3);
    const auto bare = word_topic_init(unlabeled, c, r3);
    for (double v : bare.shared_labels.param.data()) CHECK(v < c.hyper.sigma_label_shared + c.init_jitter);
  }

  TEST_CASE("restarts keep the run with the highest final bound") {
    auto docs = test::random_docs(25, 20, 6, 19, 30, 2, 10);
    auto c = small_config(3, 1, 1, 20, 6, 40);
    std::vector<double> finals;
    for (std::uint64_t r = 0; r < 4; ++r) {
      auto one = c;
      one.seed = c.seed + r;
      finals.push_back(train(docs, one).elbo_trace.back());
    }
    c.restarts = 4;
    std::vector<double> seen;
    auto best = train(docs, c, [&](std::size_t, double v) { seen.push_back(v); });
    const auto top = std::max_element(finals.begin(), finals.end());
    CHECK(best.elbo_trace.back() == *top);
    CHECK(best.restart == static_cast<std::size_t>(top - finals.begin()));
    CHECK(seen == best.elbo_trace);
    c.restarts = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }

  TEST_CASE("word-topic init trains with a nondecreasing bound") {
    auto docs = test::random_docs(30, 24, 8, 23, 30, 2, 10);
    auto c = small_config(3, 2, 2, 24, 8, 2);
    c.init = InitMethod::word_topics;
    auto a = train(docs, c);
    CHECK(a.globals == train(docs, c).globals);
    for (std::size_t i = 1; i < a.elbo_trace.size(); ++i)
      CHECK(a.elbo_trace[i] >= a.elbo_trace[i - 1] - 1e-8 * std::fabs(a.elbo_trace[i - 1]));
  }

  TEST_CASE("non-finite parameters abort training naming the sweep") {
    auto docs = test::random_docs(4, 6, 2, 1);
    auto c = small_config(2, 1, 1, 6, 2);
    c.hyper.sigma_word_shared = 1e308;
    CHECK_THROWS_WITH_AS(train(docs, c), doctest::Contains("sweep 1"), NumericError);
  }
}
