#pragma once

// Ancestral sampling from the generative model and synthetic corpora with a
// known ground truth.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ibtm/corpus.hpp"
#include "ibtm/featurize.hpp"
#include "ibtm/matrix.hpp"
#include "ibtm/model.hpp"

namespace ibtm {

/// Row-stochastic topic distributions (point values, not variational factors).
struct TopicDistributions {
  Matrix shared_words;    // K x V
  Matrix private_words;   // T x V
  Matrix shared_labels;   // K x L
  Matrix private_labels;  // S x L

  ModelDims dims() const noexcept;
  /// Throws InvalidArgument when a row is not a probability distribution.
  void validate() const;
};

struct SampledDocument {
  std::vector<std::uint32_t> words;
  std::vector<std::uint32_t> labels;
  std::vector<double> shared_weights;  // theta
  double word_share = 1.0;             // rho
  double label_share = 1.0;            // mu
  std::size_t private_word_tokens = 0;
  std::size_t private_label_tokens = 0;
};

/// Draws theta, kappa, nu, rho, mu, then every token. When a view has no
/// private topics its switch is fixed to shared and its Beta prior is unused.
SampledDocument sample_document(const TopicDistributions& topics, std::size_t n_words,
                                std::size_t n_labels, const HyperParams& hyper,
                                std::mt19937_64& rng);

/// Collapses a token list into sorted (id, count) pairs.
std::vector<TokenCount> count_tokens(const std::vector<std::uint32_t>& ids);

/// Each topic row (shared rows first, then private) owns a contiguous block of
/// ids carrying `peak_mass`; the remaining mass is spread uniformly.
TopicDistributions peaked_topics(const ModelDims& dims, double peak_mass);

/// Location vocabulary for synthetic drawings: word ids of one topic block sit
/// around a common body site so they form a single mean-shift region.
LocationVocab synthetic_location_vocab(const ModelDims& dims);

struct SyntheticCorpusOptions {
  std::size_t documents = 500;
  std::size_t words_per_doc = 60;
  std::size_t labels_per_doc = 3;
  double point_jitter = 0.002;  // std-dev of the offset around each centroid
};

/// Samples documents as drawing points (one per word token, placed at the word's
/// centroid plus jitter) and distinct label names "label_NN".
Corpus synthesize_corpus(const TopicDistributions& topics, const LocationVocab& vocab,
                         const HyperParams& hyper, const SyntheticCorpusOptions& options,
                         std::mt19937_64& rng);

/// Name used for synthetic label id `id` ("label_07"); sorts in id order.
std::string synthetic_label_name(std::size_t id);

}  // namespace ibtm
