#include "ibtm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "ibtm/error.hpp"

namespace ibtm {

namespace {

double sample_gamma(double shape, std::mt19937_64& rng) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng);
}

std::vector<double> sample_dirichlet(std::size_t n, double alpha, std::mt19937_64& rng) {
  std::vector<double> out(n);
  if (n == 0) return out;
  double total = 0.0;
  for (auto& v : out) total += (v = sample_gamma(alpha, rng));
  if (total <= 0.0) {
    // every draw underflowed (tiny alpha): all mass on one uniformly chosen entry
    std::fill(out.begin(), out.end(), 0.0);
    out[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

double sample_beta(const BetaParams& p, std::mt19937_64& rng) {
  const double x = sample_gamma(p.a, rng);
  const double y = sample_gamma(p.b, rng);
  if (x + y <= 0.0) return std::bernoulli_distribution(p.a / (p.a + p.b))(rng) ? 1.0 : 0.0;
  return x / (x + y);
}

std::uint32_t sample_index(std::span<const double> weights, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  std::uint32_t last = 0;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

void check_stochastic(const Matrix& m, const char* name) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double total = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0)) throw InvalidArgument(std::string(name) + " has a negative entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw InvalidArgument(std::string(name) + " row " + std::to_string(r) + " does not sum to 1");
  }
}

// Draws one token of a view: shared with probability `share`.
std::uint32_t sample_token(const Matrix& shared, const Matrix& priv, std::span<const double> theta,
                           std::span<const double> private_weights, double share,
                           std::mt19937_64& rng, std::size_t& private_count) {
  const bool use_shared =
      priv.rows() == 0 || std::uniform_real_distribution<double>(0.0, 1.0)(rng) < share;
  if (use_shared) return sample_index(shared.row(sample_index(theta, rng)), rng);
  ++private_count;
  return sample_index(priv.row(sample_index(private_weights, rng)), rng);
}

void fill_block_rows(Matrix& m, std::size_t first_row_block, std::size_t n_blocks,
                     double peak_mass) {
  const std::size_t cols = m.cols();
  const std::size_t width = std::max<std::size_t>(1, cols / n_blocks);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::size_t block = first_row_block + r;
    const std::size_t begin = std::min(block * width, cols - 1);
    const std::size_t end = std::min(cols, begin + width);
    auto row = m.row(r);
    const double base = (1.0 - peak_mass) / static_cast<double>(cols);
    std::fill(row.begin(), row.end(), base);
    for (std::size_t c = begin; c < end; ++c) row[c] += peak_mass / static_cast<double>(end - begin);
  }
}

}  // namespace

ModelDims TopicDistributions::dims() const noexcept {
  return {shared_words.rows(), private_words.rows(), private_labels.rows(), shared_words.cols(),
          shared_labels.cols()};
}

void TopicDistributions::validate() const {
  check_stochastic(shared_words, "shared word topics");
  check_stochastic(private_words, "private word topics");
  check_stochastic(shared_labels, "shared label topics");
  check_stochastic(private_labels, "private label topics");
}

SampledDocument sample_document(const TopicDistributions& topics, std::size_t n_words,
                                std::size_t n_labels, const HyperParams& hyper,
                                std::mt19937_64& rng) {
  topics.validate();
  const ModelDims dims = topics.dims();
  SampledDocument doc;
  doc.shared_weights = sample_dirichlet(dims.shared, hyper.alpha_shared, rng);
  const auto word_private = sample_dirichlet(dims.word_private, hyper.alpha_word_private, rng);
  const auto label_private = sample_dirichlet(dims.label_private, hyper.alpha_label_private, rng);
  doc.word_share = dims.word_private > 0 ? sample_beta(hyper.word_share, rng) : 1.0;
  doc.label_share = dims.label_private > 0 ? sample_beta(hyper.label_share, rng) : 1.0;

  doc.words.reserve(n_words);
  for (std::size_t i = 0; i < n_words; ++i)
    doc.words.push_back(sample_token(topics.shared_words, topics.private_words, doc.shared_weights,
                                     word_private, doc.word_share, rng, doc.private_word_tokens));
  doc.labels.reserve(n_labels);
  for (std::size_t i = 0; i < n_labels; ++i)
    doc.labels.push_back(sample_token(topics.shared_labels, topics.private_labels,
                                      doc.shared_weights, label_private, doc.label_share, rng,
                                      doc.private_label_tokens));
  return doc;
}

std::vector<TokenCount> count_tokens(const std::vector<std::uint32_t>& ids) {
  std::vector<std::uint32_t> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<TokenCount> out;
  for (auto id : sorted) {
    if (!out.empty() && out.back().id == id)
      ++out.back().count;
    else
      out.push_back({id, 1});
  }
  return out;
}

TopicDistributions peaked_topics(const ModelDims& dims, double peak_mass) {
  if (!(peak_mass >= 0.0 && peak_mass <= 1.0)) throw InvalidArgument("peak_mass must be in [0,1]");
  TopicDistributions t;
  t.shared_words = Matrix(dims.shared, dims.words);
  t.private_words = Matrix(dims.word_private, dims.words);
  t.shared_labels = Matrix(dims.shared, dims.labels);
  t.private_labels = Matrix(dims.label_private, dims.labels);
  const std::size_t word_blocks = dims.shared + dims.word_private;
  const std::size_t label_blocks = dims.shared + dims.label_private;
  fill_block_rows(t.shared_words, 0, word_blocks, peak_mass);
  fill_block_rows(t.private_words, dims.shared, word_blocks, peak_mass);
  fill_block_rows(t.shared_labels, 0, label_blocks, peak_mass);
  fill_block_rows(t.private_labels, dims.shared, label_blocks, peak_mass);
  return t;
}

LocationVocab synthetic_location_vocab(const ModelDims& dims) {
  const std::size_t blocks = std::max<std::size_t>(1, dims.shared + dims.word_private);
  const std::size_t width = std::max<std::size_t>(1, dims.words / blocks);
  const std::size_t n_sites = (dims.words + width - 1) / width;
  // Sites on a coarse lattice over both views, 0.25 apart.
  std::vector<std::pair<View, Point2>> sites;
  for (std::size_t i = 0; sites.size() < n_sites; ++i) {
    const std::size_t per_view = 12;  // 3 columns x 4 rows
    const std::size_t local = i % per_view;
    const View view = (i / per_view) % 2 == 0 ? View::front : View::back;
    const double x = 0.25 + 0.25 * static_cast<double>(local % 3);
    const double y = 0.125 + 0.25 * static_cast<double>(local / 3);
    // past two full views, nudge so sites stay distinct
    const double nudge = 0.06 * static_cast<double>(i / (2 * per_view));
    sites.push_back({view, {x + nudge, y}});
  }
  LocationVocab vocab;
  vocab.centroids.resize(dims.words);
  for (std::size_t w = 0; w < dims.words; ++w) {
    const std::size_t site = std::min(w / width, sites.size() - 1);
    const std::size_t slot = w % width;
    // small ring around the site, radius 0.02
    const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(slot) /
                         static_cast<double>(width);
    const double radius = width > 1 ? 0.02 : 0.0;
    DrawingPoint p;
    p.view = sites[site].first;
    p.x = std::clamp(sites[site].second[0] + radius * std::cos(angle), 0.0, 1.0);
    p.y = std::clamp(sites[site].second[1] + radius * std::sin(angle), 0.0, 1.0);
    vocab.centroids[w] = vocab.embed(p);
  }
  return vocab;
}

std::string synthetic_label_name(std::size_t id) {
  std::string digits = std::to_string(id);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return "label_" + digits;
}

Corpus synthesize_corpus(const TopicDistributions& topics, const LocationVocab& vocab,
                         const HyperParams& hyper, const SyntheticCorpusOptions& options,
                         std::mt19937_64& rng) {
  if (vocab.size() != topics.dims().words)
    throw InvalidArgument("location vocabulary size does not match the word vocabulary");
  Corpus corpus;
  std::normal_distribution<double> jitter(0.0, options.point_jitter);
  std::string width_digits = std::to_string(options.documents);
  for (std::size_t m = 0; m < options.documents; ++m) {
    auto sample = sample_document(topics, options.words_per_doc, options.labels_per_doc, hyper, rng);
    Document doc;
    std::string id = std::to_string(m);
    doc.id = "doc_" + std::string(width_digits.size() - id.size(), '0') + id;
    for (auto w : sample.words) {
      DrawingPoint p = vocab.unembed(w);
      if (options.point_jitter > 0.0) {
        p.x = std::clamp(p.x + jitter(rng), 0.0, 1.0);
        p.y = std::clamp(p.y + jitter(rng), 0.0, 1.0);
      }
      doc.points.push_back(p);
    }
    std::set<std::uint32_t> seen;
    for (auto l : sample.labels)
      if (seen.insert(l).second) doc.labels.push_back(synthetic_label_name(l));
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace ibtm
