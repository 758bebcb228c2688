#include "ibtm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

#include "ibtm/error.hpp"
#include "parallel.hpp"

namespace ibtm {

namespace {

constexpr double kDigammaFloor = 1e-300;

double psi(double x) {
  // Let inf/NaN propagate so train() can report the sweep instead of Boost throwing.
  if (!std::isfinite(x)) return x;
  return boost::math::digamma(std::max(x, kDigammaFloor));
}

// E[log x_k] under Dir(params).
void dirichlet_elog(std::span<const double> params, std::vector<double>& out) {
  out.resize(params.size());
  if (params.empty()) return;
  const double total = psi(std::accumulate(params.begin(), params.end(), 0.0));
  for (std::size_t k = 0; k < params.size(); ++k) out[k] = psi(params[k]) - total;
}

// E_q[log Dir(x | prior)] - E_q[log Dir(x | params)] for a symmetric prior.
double dirichlet_term(double prior, std::span<const double> params, std::span<const double> elog) {
  const auto n = static_cast<double>(params.size());
  double sum = 0.0;
  double value = std::lgamma(n * prior) - n * std::lgamma(prior);
  for (std::size_t k = 0; k < params.size(); ++k) {
    sum += params[k];
    value += (prior - params[k]) * elog[k] + std::lgamma(params[k]);
  }
  return value - std::lgamma(sum);
}

double beta_term(const BetaParams& prior, const BetaParams& q) {
  const double total = psi(q.a + q.b);
  const double elog_on = psi(q.a) - total;
  const double elog_off = psi(q.b) - total;
  return std::lgamma(prior.a + prior.b) - std::lgamma(prior.a) - std::lgamma(prior.b) -
         std::lgamma(q.a + q.b) + std::lgamma(q.a) + std::lgamma(q.b) +
         (prior.a - q.a) * elog_on + (prior.b - q.b) * elog_off;
}

struct SwitchElog {
  double shared = 0.0;
  double priv = 0.0;
};

SwitchElog switch_elog(const BetaParams& q, bool has_private) {
  if (!has_private) return {};
  const double total = psi(q.a + q.b);
  return {psi(q.a) - total, psi(q.b) - total};
}

// Per-document expectations that the token updates and the ELBO share.
struct LocalExpectations {
  std::vector<double> shared, word_private, label_private;
  SwitchElog word_switch, label_switch;

  LocalExpectations(const DocPosterior& post, const ModelDims& dims) {
    dirichlet_elog(post.shared, shared);
    dirichlet_elog(post.word_private, word_private);
    dirichlet_elog(post.label_private, label_private);
    word_switch = switch_elog(post.word_share, dims.word_private > 0);
    label_switch = switch_elog(post.label_share, dims.label_private > 0);
  }
};

// Fills `logits` with the unnormalized log responsibility of each
// (switch, topic) state for one token of one view.
void token_logits(std::uint32_t id, const TopicBlock& shared_block, const TopicBlock& private_block,
                  std::span<const double> elog_shared, std::span<const double> elog_private,
                  const SwitchElog& sw, std::span<double> logits) {
  const std::size_t k_shared = shared_block.rows();
  for (std::size_t k = 0; k < k_shared; ++k)
    logits[k] = sw.shared + elog_shared[k] + shared_block.elog(k, id);
  for (std::size_t t = 0; t < private_block.rows(); ++t)
    logits[k_shared + t] = sw.priv + elog_private[t] + private_block.elog(t, id);
}

void softmax_inplace(std::span<double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (auto& x : v) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : v) x /= total;
}

double token_view_elbo(std::span<const TokenCount> tokens, const Matrix& resp,
                       const TopicBlock& shared_block, const TopicBlock& private_block,
                       std::span<const double> elog_shared, std::span<const double> elog_private,
                       const SwitchElog& sw) {
  std::vector<double> logits(resp.cols());
  double value = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    token_logits(tokens[i].id, shared_block, private_block, elog_shared, elog_private, sw, logits);
    double row = 0.0;
    for (std::size_t j = 0; j < resp.cols(); ++j) {
      const double r = resp(i, j);
      if (r > 0.0) row += r * (logits[j] - std::log(r));
    }
    value += static_cast<double>(tokens[i].count) * row;
  }
  return value;
}

void check_ids(std::span<const TokenCount> tokens, std::size_t limit, const char* what) {
  for (const auto& t : tokens)
    if (t.id >= limit)
      throw InvalidArgument(std::string(what) + " id " + std::to_string(t.id) +
                            " outside vocabulary of size " + std::to_string(limit));
}

void add_jitter(TopicBlock& block, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : block.param.data()) v += jitter * unit(rng);
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void HyperParams::validate() const {
  const double values[] = {alpha_shared,       alpha_word_private,  alpha_label_private,
                           sigma_word_shared,  sigma_word_private,  sigma_label_shared,
                           sigma_label_private, word_share.a,       word_share.b,
                           label_share.a,      label_share.b};
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidArgument("hyperparameters must be finite and strictly positive");
}

void ModelConfig::validate() const {
  if (dims.shared < 1) throw InvalidArgument("need at least one shared topic");
  if (dims.words < 1) throw InvalidArgument("word vocabulary must be non-empty");
  if (dims.labels < 1) throw InvalidArgument("label vocabulary must be non-empty");
  if (max_sweeps < 1) throw InvalidArgument("max_sweeps must be >= 1");
  if (!(elbo_rel_tol >= 0.0)) throw InvalidArgument("elbo_rel_tol must be >= 0");
  if (!(init_jitter >= 0.0)) throw InvalidArgument("init_jitter must be >= 0");
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  hyper.validate();
}

TopicBlock::TopicBlock(std::size_t rows, std::size_t cols, double fill)
    : param(rows, cols, fill), elog(rows, cols, 0.0) {}

void TopicBlock::refresh() {
  elog = Matrix(param.rows(), param.cols());
  std::vector<double> row_elog;
  for (std::size_t r = 0; r < param.rows(); ++r) {
    dirichlet_elog(param.row(r), row_elog);
    std::copy(row_elog.begin(), row_elog.end(), elog.row(r).begin());
  }
}

Matrix TopicBlock::expected() const {
  Matrix out = param;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (auto& v : row) v /= total;
  }
  return out;
}

ModelDims GlobalTopics::dims() const noexcept {
  return {shared_words.rows(), private_words.rows(), private_labels.rows(), shared_words.cols(),
          shared_labels.cols()};
}

void GlobalTopics::refresh() {
  shared_words.refresh();
  private_words.refresh();
  shared_labels.refresh();
  private_labels.refresh();
}

std::vector<double> DocPosterior::shared_mean() const {
  std::vector<double> out = shared;
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& v : out) v /= total;
  return out;
}

DocPosterior prior_posterior(const TokenDoc& doc, const ModelDims& dims, const HyperParams& hyper) {
  DocPosterior post;
  post.shared.assign(dims.shared, hyper.alpha_shared);
  post.word_private.assign(dims.word_private, hyper.alpha_word_private);
  post.label_private.assign(dims.label_private, hyper.alpha_label_private);
  post.word_share = hyper.word_share;
  post.label_share = hyper.label_share;
  post.word_resp = Matrix(doc.words.size(), dims.shared + dims.word_private);
  post.label_resp = Matrix(doc.labels.size(), dims.shared + dims.label_private);
  return post;
}

GlobalTopics init_globals(const ModelConfig& config, std::mt19937_64& rng) {
  const auto& d = config.dims;
  const auto& h = config.hyper;
  GlobalTopics g;
  g.shared_words = TopicBlock(d.shared, d.words, h.sigma_word_shared);
  g.private_words = TopicBlock(d.word_private, d.words, h.sigma_word_private);
  g.shared_labels = TopicBlock(d.shared, d.labels, h.sigma_label_shared);
  g.private_labels = TopicBlock(d.label_private, d.labels, h.sigma_label_private);
  add_jitter(g.shared_words, config.init_jitter, rng);
  add_jitter(g.private_words, config.init_jitter, rng);
  add_jitter(g.shared_labels, config.init_jitter, rng);
  add_jitter(g.private_labels, config.init_jitter, rng);
  g.refresh();
  return g;
}

void e_step_document(const TokenDoc& doc, const GlobalTopics& globals, const HyperParams& hyper,
                     DocPosterior& post, const EStepOptions& options) {
  const ModelDims dims = globals.dims();
  check_ids(doc.words, dims.words, "word");
  check_ids(doc.labels, dims.labels, "label");
  const std::size_t K = dims.shared;
  const std::size_t T = dims.word_private;
  const std::size_t S = dims.label_private;
  if (post.shared.size() != K || post.word_private.size() != T || post.label_private.size() != S ||
      post.word_resp.rows() != doc.words.size() || post.label_resp.rows() != doc.labels.size())
    post = prior_posterior(doc, dims, hyper);

  std::vector<double> next_shared(K);
  std::size_t iter = 0;
  while (iter < options.max_iterations) {
    ++iter;
    const LocalExpectations ex(post, dims);

    for (std::size_t i = 0; i < doc.words.size(); ++i) {
      auto row = post.word_resp.row(i);
      token_logits(doc.words[i].id, globals.shared_words, globals.private_words, ex.shared,
                   ex.word_private, ex.word_switch, row);
      softmax_inplace(row);
    }
    for (std::size_t i = 0; i < doc.labels.size(); ++i) {
      auto row = post.label_resp.row(i);
      token_logits(doc.labels[i].id, globals.shared_labels, globals.private_labels, ex.shared,
                   ex.label_private, ex.label_switch, row);
      softmax_inplace(row);
    }

    std::fill(next_shared.begin(), next_shared.end(), hyper.alpha_shared);
    std::fill(post.word_private.begin(), post.word_private.end(), hyper.alpha_word_private);
    std::fill(post.label_private.begin(), post.label_private.end(), hyper.alpha_label_private);
    double word_on = 0.0, word_off = 0.0, label_on = 0.0, label_off = 0.0;
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
      const auto n = static_cast<double>(doc.words[i].count);
      for (std::size_t k = 0; k < K; ++k) {
        next_shared[k] += n * post.word_resp(i, k);
        word_on += n * post.word_resp(i, k);
      }
      for (std::size_t t = 0; t < T; ++t) {
        post.word_private[t] += n * post.word_resp(i, K + t);
        word_off += n * post.word_resp(i, K + t);
      }
    }
    for (std::size_t i = 0; i < doc.labels.size(); ++i) {
      const auto n = static_cast<double>(doc.labels[i].count);
      for (std::size_t k = 0; k < K; ++k) {
        next_shared[k] += n * post.label_resp(i, k);
        label_on += n * post.label_resp(i, k);
      }
      for (std::size_t s = 0; s < S; ++s) {
        post.label_private[s] += n * post.label_resp(i, K + s);
        label_off += n * post.label_resp(i, K + s);
      }
    }
    if (T > 0) post.word_share = {hyper.word_share.a + word_on, hyper.word_share.b + word_off};
    if (S > 0) post.label_share = {hyper.label_share.a + label_on, hyper.label_share.b + label_off};

    double change = 0.0;
    for (std::size_t k = 0; k < K; ++k) change += std::abs(next_shared[k] - post.shared[k]);
    post.shared.swap(next_shared);
    if (change / static_cast<double>(K) < options.gamma_tol) break;
  }
  post.iterations = iter;
}

DocPosterior e_step_document(const TokenDoc& doc, const GlobalTopics& globals,
                             const HyperParams& hyper, const EStepOptions& options) {
  DocPosterior post = prior_posterior(doc, globals.dims(), hyper);
  e_step_document(doc, globals, hyper, post, options);
  return post;
}

void m_step(std::span<const TokenDoc> docs, std::span<const DocPosterior> posts,
            const HyperParams& hyper, GlobalTopics& globals) {
  if (docs.size() != posts.size()) throw InvalidArgument("one posterior per document required");
  const ModelDims dims = globals.dims();
  const std::size_t K = dims.shared;
  std::fill(globals.shared_words.param.data().begin(), globals.shared_words.param.data().end(),
            hyper.sigma_word_shared);
  std::fill(globals.private_words.param.data().begin(), globals.private_words.param.data().end(),
            hyper.sigma_word_private);
  std::fill(globals.shared_labels.param.data().begin(), globals.shared_labels.param.data().end(),
            hyper.sigma_label_shared);
  std::fill(globals.private_labels.param.data().begin(), globals.private_labels.param.data().end(),
            hyper.sigma_label_private);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& doc = docs[d];
    const auto& post = posts[d];
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
      const auto n = static_cast<double>(doc.words[i].count);
      const auto v = doc.words[i].id;
      for (std::size_t k = 0; k < K; ++k) globals.shared_words.param(k, v) += n * post.word_resp(i, k);
      for (std::size_t t = 0; t < dims.word_private; ++t)
        globals.private_words.param(t, v) += n * post.word_resp(i, K + t);
    }
    for (std::size_t i = 0; i < doc.labels.size(); ++i) {
      const auto n = static_cast<double>(doc.labels[i].count);
      const auto v = doc.labels[i].id;
      for (std::size_t k = 0; k < K; ++k)
        globals.shared_labels.param(k, v) += n * post.label_resp(i, k);
      for (std::size_t s = 0; s < dims.label_private; ++s)
        globals.private_labels.param(s, v) += n * post.label_resp(i, K + s);
    }
  }
  globals.refresh();
}

double local_elbo(const TokenDoc& doc, const DocPosterior& post, const GlobalTopics& globals,
                  const HyperParams& hyper) {
  const ModelDims dims = globals.dims();
  const LocalExpectations ex(post, dims);
  double value = dirichlet_term(hyper.alpha_shared, post.shared, ex.shared);
  if (dims.word_private > 0) {
    value += dirichlet_term(hyper.alpha_word_private, post.word_private, ex.word_private);
    value += beta_term(hyper.word_share, post.word_share);
  }
  if (dims.label_private > 0) {
    value += dirichlet_term(hyper.alpha_label_private, post.label_private, ex.label_private);
    value += beta_term(hyper.label_share, post.label_share);
  }
  value += token_view_elbo(doc.words, post.word_resp, globals.shared_words, globals.private_words,
                           ex.shared, ex.word_private, ex.word_switch);
  value += token_view_elbo(doc.labels, post.label_resp, globals.shared_labels,
                           globals.private_labels, ex.shared, ex.label_private, ex.label_switch);
  return value;
}

double global_elbo(const GlobalTopics& globals, const HyperParams& hyper) {
  auto block_term = [](const TopicBlock& block, double prior) {
    double value = 0.0;
    for (std::size_t r = 0; r < block.rows(); ++r)
      value += dirichlet_term(prior, block.param.row(r), block.elog.row(r));
    return value;
  };
  return block_term(globals.shared_words, hyper.sigma_word_shared) +
         block_term(globals.private_words, hyper.sigma_word_private) +
         block_term(globals.shared_labels, hyper.sigma_label_shared) +
         block_term(globals.private_labels, hyper.sigma_label_private);
}

double elbo(std::span<const TokenDoc> docs, const GlobalTopics& globals,
            std::span<const DocPosterior> posts, const HyperParams& hyper) {
  if (docs.size() != posts.size()) throw InvalidArgument("one posterior per document required");
  double value = global_elbo(globals, hyper);
  for (std::size_t d = 0; d < docs.size(); ++d) value += local_elbo(docs[d], posts[d], globals, hyper);
  return value;
}

namespace {

TrainResult fit(std::span<const TokenDoc> docs, const ModelConfig& config, std::uint64_t seed,
                const SweepCallback& on_sweep) {
  TrainResult result;
  std::mt19937_64 rng(seed);
  result.globals = config.init == InitMethod::word_topics ? word_topic_init(docs, config, rng)
                                                          : init_globals(config, rng);
  result.posteriors.reserve(docs.size());
  for (const auto& doc : docs)
    result.posteriors.push_back(prior_posterior(doc, config.dims, config.hyper));

  std::vector<double> local(docs.size());
  for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    detail::parallel_for(docs.size(), config.threads, [&](std::size_t d) {
      e_step_document(docs[d], result.globals, config.hyper, result.posteriors[d], config.estep);
    });
    m_step(docs, result.posteriors, config.hyper, result.globals);

    const auto& g = result.globals;
    if (!all_finite(g.shared_words.param) || !all_finite(g.private_words.param) ||
        !all_finite(g.shared_labels.param) || !all_finite(g.private_labels.param))
      throw NumericError("non-finite topic parameter after sweep " + std::to_string(sweep));

    detail::parallel_for(docs.size(), config.threads, [&](std::size_t d) {
      local[d] = local_elbo(docs[d], result.posteriors[d], result.globals, config.hyper);
    });
    double value = global_elbo(result.globals, config.hyper);
    for (double v : local) value += v;
    if (!std::isfinite(value))
      throw NumericError("non-finite ELBO at sweep " + std::to_string(sweep));

    result.elbo_trace.push_back(value);
    result.sweeps = sweep;
    if (on_sweep) on_sweep(sweep, value);
    if (sweep > 1) {
      const double prev = result.elbo_trace[sweep - 2];
      if ((value - prev) / std::abs(prev) < config.elbo_rel_tol) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace

GlobalTopics word_topic_init(std::span<const TokenDoc> docs, const ModelConfig& config,
                             std::mt19937_64& rng) {
  const auto& dims = config.dims;
  GlobalTopics g = init_globals(config, rng);
  const std::size_t K = dims.shared;
  const std::size_t n_topics = K + dims.word_private;

  ModelConfig lda = config;
  lda.dims = {n_topics, 0, 0, dims.words, dims.labels};
  lda.init = InitMethod::jitter;
  lda.restarts = 1;
  lda.seed = rng();
  std::vector<TokenDoc> words_only;
  words_only.reserve(docs.size());
  for (const auto& doc : docs) words_only.push_back({doc.words, {}});
  const auto fitted = fit(words_only, lda, lda.seed, {});

  // excess[i][l]: label mass seen alongside word topic i beyond what the
  // corpus-wide label rate predicts
  std::vector<double> label_rate(dims.labels, 0.0);
  double label_total = 0.0;
  for (const auto& doc : docs)
    for (const auto& t : doc.labels) {
      label_rate[t.id] += t.count;
      label_total += t.count;
    }
  Matrix excess(n_topics, dims.labels, 0.0);
  std::vector<double> score(n_topics, 0.0);
  if (label_total > 0.0) {
    for (auto& r : label_rate) r /= label_total;
    std::vector<double> mass(n_topics, 0.0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      if (docs[d].labels.empty()) continue;
      const auto theta = fitted.posteriors[d].shared_mean();
      double n = 0.0;
      for (const auto& t : docs[d].labels) n += t.count;
      for (std::size_t i = 0; i < n_topics; ++i) {
        mass[i] += theta[i] * n;
        for (const auto& t : docs[d].labels) excess(i, t.id) += theta[i] * t.count;
      }
    }
    for (std::size_t i = 0; i < n_topics; ++i)
      for (std::size_t l = 0; l < dims.labels; ++l) {
        excess(i, l) = std::max(0.0, excess(i, l) - mass[i] * label_rate[l]);
        score[i] += mass[i] > 0.0 ? excess(i, l) / mass[i] : 0.0;
      }
  }

  std::vector<std::size_t> order(n_topics);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  for (std::size_t r = 0; r < n_topics; ++r) {
    const auto src = fitted.globals.shared_words.param.row(order[r]);
    auto dst = r < K ? g.shared_words.param.row(r) : g.private_words.param.row(r - K);
    std::copy(src.begin(), src.end(), dst.begin());
    if (r < K)
      for (std::size_t l = 0; l < dims.labels; ++l) g.shared_labels.param(r, l) += excess(order[r], l);
  }
  g.refresh();
  return g;
}

TrainResult train(std::span<const TokenDoc> docs, const ModelConfig& config,
                  const SweepCallback& on_sweep) {
  config.validate();
  if (docs.empty()) throw InvalidArgument("cannot train on an empty corpus");
  for (const auto& doc : docs) {
    check_ids(doc.words, config.dims.words, "word");
    check_ids(doc.labels, config.dims.labels, "label");
  }
  if (config.restarts == 1) return fit(docs, config, config.seed, on_sweep);

  TrainResult best;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    auto run = fit(docs, config, config.seed + r, {});
    if (r == 0 || run.elbo_trace.back() > best.elbo_trace.back()) {
      best = std::move(run);
      best.restart = r;
    }
  }
  if (on_sweep)
    for (std::size_t i = 0; i < best.elbo_trace.size(); ++i) on_sweep(i + 1, best.elbo_trace[i]);
  return best;
}

}  // namespace ibtm
