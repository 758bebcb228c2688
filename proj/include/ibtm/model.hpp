#pragma once

// Two-view inter-battery topic model with batch mean-field variational
// inference.
//
// Each document mixes K shared topics (weights theta) that emit both drawing
// words and labels, T private word topics (weights kappa) and S private label
// topics (weights nu). A per-document share proportion (rho for words, mu for
// labels) decides whether a token comes from the shared or the private space.
// With T = S = 0 the model reduces to multimodal LDA, and dropping the label
// view as well gives plain LDA.
//
// Variational family: Dirichlet factors for theta, kappa, nu and for every
// topic row, Beta factors for rho and mu, and one categorical per distinct
// token over the K + T (words) or K + S (labels) joint switch/topic states.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ibtm/corpus.hpp"
#include "ibtm/matrix.hpp"

namespace ibtm {

struct BetaParams {
  double a = 1.0;
  double b = 1.0;

  bool operator==(const BetaParams&) const = default;
};

struct HyperParams {
  double alpha_shared = 0.8;         // theta ~ Dir(alpha_shared)
  double alpha_word_private = 0.8;   // kappa
  double alpha_label_private = 0.8;  // nu
  double sigma_word_shared = 0.6;    // shared word topic rows
  double sigma_word_private = 0.6;
  double sigma_label_shared = 0.6;
  double sigma_label_private = 0.6;
  BetaParams word_share{1.0, 1.0};   // rho ~ Beta(word_share)
  BetaParams label_share{1.0, 1.0};  // mu ~ Beta(label_share)

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

/// Topic and vocabulary sizes.
struct ModelDims {
  std::size_t shared = 20;         // K
  std::size_t word_private = 5;    // T
  std::size_t label_private = 5;   // S
  std::size_t words = 0;           // V
  std::size_t labels = 0;          // label vocabulary size

  bool operator==(const ModelDims&) const = default;
};

struct EStepOptions {
  double gamma_tol = 1e-4;  // mean absolute change of the shared Dirichlet parameters
  std::size_t max_iterations = 100;
};

enum class InitMethod {
  jitter,       // priors plus uniform jitter
  word_topics,  // words-only LDA first, shared rows chosen by label association
};

struct ModelConfig {
  ModelDims dims;
  HyperParams hyper;
  std::size_t max_sweeps = 200;
  double elbo_rel_tol = 1e-5;
  std::uint64_t seed = 0;
  double init_jitter = 0.01;
  InitMethod init = InitMethod::jitter;
  std::size_t restarts = 1;  // restart r uses seed + r; the highest final ELBO wins
  std::size_t threads = 1;
  EStepOptions estep;

  void validate() const;
};

/// Variational Dirichlet parameters of a block of topic rows plus the cached
/// E[log p] of each entry.
struct TopicBlock {
  Matrix param;
  Matrix elog;

  TopicBlock() = default;
  TopicBlock(std::size_t rows, std::size_t cols, double fill);

  std::size_t rows() const noexcept { return param.rows(); }
  std::size_t cols() const noexcept { return param.cols(); }
  void refresh();
  /// Row-normalized variational means.
  Matrix expected() const;

  bool operator==(const TopicBlock& other) const { return param == other.param; }
};

struct GlobalTopics {
  TopicBlock shared_words;    // K x V
  TopicBlock private_words;   // T x V
  TopicBlock shared_labels;   // K x L
  TopicBlock private_labels;  // S x L

  ModelDims dims() const noexcept;
  void refresh();
  bool operator==(const GlobalTopics&) const = default;
};

/// Per-document variational state.
struct DocPosterior {
  std::vector<double> shared;         // K, Dirichlet for theta
  std::vector<double> word_private;   // T, Dirichlet for kappa
  std::vector<double> label_private;  // S, Dirichlet for nu
  BetaParams word_share;              // rho
  BetaParams label_share;             // mu
  Matrix word_resp;                   // distinct words x (K + T)
  Matrix label_resp;                  // distinct labels x (K + S)
  std::size_t iterations = 0;         // inner iterations of the last E-step

  /// Normalized shared weights (the variational mean of theta).
  std::vector<double> shared_mean() const;
};

/// Posterior equal to the priors, with empty responsibilities sized for `doc`.
DocPosterior prior_posterior(const TokenDoc& doc, const ModelDims& dims, const HyperParams& hyper);

/// Priors plus uniform jitter in [0, init_jitter) on every topic entry.
GlobalTopics init_globals(const ModelConfig& config, std::mt19937_64& rng);

/// Data-driven start. Fits plain LDA with K+T topics on the words alone, ranks
/// those topics by how much label mass co-occurs with them beyond the corpus
/// rate, and makes the top K the shared word rows (the rest private). Shared
/// label rows get that excess label mass; everything else is init_globals().
GlobalTopics word_topic_init(std::span<const TokenDoc> docs, const ModelConfig& config,
                             std::mt19937_64& rng);

/// Coordinate ascent on one document, starting from the state already in
/// `post` (warm start). Throws InvalidArgument for out-of-range token ids.
void e_step_document(const TokenDoc& doc, const GlobalTopics& globals, const HyperParams& hyper,
                     DocPosterior& post, const EStepOptions& options = {});

/// Same, starting from the priors.
DocPosterior e_step_document(const TokenDoc& doc, const GlobalTopics& globals,
                             const HyperParams& hyper, const EStepOptions& options = {});

/// Closed-form update of all topic rows from the responsibilities.
void m_step(std::span<const TokenDoc> docs, std::span<const DocPosterior> posts,
            const HyperParams& hyper, GlobalTopics& globals);

double local_elbo(const TokenDoc& doc, const DocPosterior& post, const GlobalTopics& globals,
                  const HyperParams& hyper);
double global_elbo(const GlobalTopics& globals, const HyperParams& hyper);
double elbo(std::span<const TokenDoc> docs, const GlobalTopics& globals,
            std::span<const DocPosterior> posts, const HyperParams& hyper);

struct TrainResult {
  GlobalTopics globals;
  std::vector<DocPosterior> posteriors;
  std::vector<double> elbo_trace;  // one entry per sweep
  std::size_t sweeps = 0;
  bool converged = false;
  std::size_t restart = 0;  // which restart was kept
};

using SweepCallback = std::function<void(std::size_t sweep, double elbo)>;

/// Alternates full E-sweeps and M-steps until the relative ELBO improvement
/// drops below `elbo_rel_tol` or `max_sweeps` is reached. Throws NumericError
/// naming the sweep when a parameter becomes NaN or infinite. With several
/// restarts the callback sees only the kept run, after all runs finish.
TrainResult train(std::span<const TokenDoc> docs, const ModelConfig& config,
                  const SweepCallback& on_sweep = {});

}  // namespace ibtm
