#include "ibtm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include "ibtm/error.hpp"

namespace ibtm {

DocPosterior infer_heldout(const BagOfWords& bag, const GlobalTopics& globals,
                           const HyperParams& hyper, const EStepOptions& options) {
  TokenDoc doc;
  doc.words = bag.counts;
  return e_step_document(doc, globals, hyper, options);
}

std::vector<ScoredLabel> rank_labels(const DocPosterior& posterior, const GlobalTopics& globals) {
  const auto theta = posterior.shared_mean();
  const Matrix eta = globals.shared_labels.expected();
  if (theta.size() != eta.rows()) throw InvalidArgument("posterior does not match the model");
  std::vector<ScoredLabel> out(eta.cols());
  for (std::uint32_t v = 0; v < eta.cols(); ++v) {
    double s = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) s += theta[k] * eta(k, v);
    out[v] = {v, s};
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  return out;
}

Prediction predict(std::span<const DrawingPoint> points, const TrainedModel& model,
                   double bandwidth) {
  const BagOfWords bag = encode_drawing(points, model.locations);
  Prediction out;
  out.regions = count_regions(points, bandwidth);
  out.budget = label_budget(out.regions.n);
  const auto posterior = infer_heldout(bag, model.globals, model.hyper);
  const auto ranked = rank_labels(posterior, model.globals);
  const std::size_t n = std::min(out.budget, ranked.size());
  out.ranked.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.ranked.push_back({model.labels.label(ranked[i].id), ranked[i].score});
  return out;
}

FMeasure f_measure(std::span<const std::string> predicted, std::span<const std::string> truth) {
  std::set<std::string> pred, gold;
  for (const auto& p : predicted) pred.insert(label_key(p));
  for (const auto& t : truth) gold.insert(label_key(t));
  std::size_t hits = 0;
  for (const auto& p : pred) hits += gold.count(p);
  FMeasure m;
  if (!pred.empty()) m.precision = static_cast<double>(hits) / static_cast<double>(pred.size());
  if (!gold.empty()) m.recall = static_cast<double>(hits) / static_cast<double>(gold.size());
  if (m.precision + m.recall > 0.0)
    m.f = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

EvalReport evaluate(const Corpus& corpus, const EvalProtocol& protocol,
                    const PredictorFactory& factory) {
  const std::size_t m = corpus.size();
  if (m < 2) throw InvalidArgument("need at least two documents to split");
  if (protocol.n_splits < 1 || protocol.n_seeds < 1)
    throw InvalidArgument("n_splits and n_seeds must be >= 1");

  EvalReport report;
  report.protocol = protocol;
  for (std::size_t split = 0; split < protocol.n_splits; ++split) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(protocol.seed + split);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = m / 2;

    Corpus train, test;
    train.language = test.language = corpus.language;
    for (std::size_t i = 0; i < m; ++i)
      (i < n_train ? train : test).documents.push_back(corpus.documents[order[i]]);

    std::optional<SplitResult> best;
    for (std::size_t j = 0; j < protocol.n_seeds; ++j) {
      SplitResult candidate;
      candidate.split = split;
      candidate.seed = protocol.seed + j;
      auto predictor = factory();
      candidate.selection_score = predictor->fit(train, candidate.seed);
      double total = 0.0;
      for (const auto& doc : test.documents) {
        const auto labels = predictor->predict(doc);
        DocScore ds{doc.id, f_measure(labels, doc.labels)};
        total += ds.score.f;
        candidate.docs.push_back(std::move(ds));
      }
      candidate.f = total / static_cast<double>(test.size());
      const bool better =
          !best || (protocol.selection == SeedSelection::best_elbo
                        ? candidate.selection_score > best->selection_score
                        : candidate.f > best->f);
      if (better) best = std::move(candidate);
    }
    report.splits.push_back(std::move(*best));
  }

  const auto n = static_cast<double>(report.splits.size());
  for (const auto& s : report.splits) report.mean_f += s.f;
  report.mean_f /= n;
  if (report.splits.size() > 1) {
    double ss = 0.0;
    for (const auto& s : report.splits) ss += (s.f - report.mean_f) * (s.f - report.mean_f);
    report.std_f = std::sqrt(ss / (n - 1.0));
  }
  return report;
}

void write_report(const EvalReport& report, std::ostream& out) {
  char buf[128];
  out << "split\tseed\tF\n";
  for (const auto& s : report.splits) {
    std::snprintf(buf, sizeof buf, "%zu\t%llu\t%.4f\n", s.split,
                  static_cast<unsigned long long>(s.seed), s.f);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "F = %.4f ± %.4f\n", report.mean_f, report.std_f);
  out << buf;
}

PreparedCorpus prepare_training(const Corpus& corpus, std::size_t vocab_size,
                                std::uint32_t label_scale, std::uint64_t seed) {
  PreparedCorpus prepared;
  prepared.labels = build_label_vocab(corpus);
  std::vector<DrawingPoint> all;
  for (const auto& doc : corpus.documents) all.insert(all.end(), doc.points.begin(), doc.points.end());
  prepared.locations = build_location_vocab(all, vocab_size, seed);
  prepared.docs.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    TokenDoc td;
    if (!doc.points.empty()) td.words = encode_drawing(doc.points, prepared.locations).counts;
    td.labels = label_tokens(doc, prepared.labels);
    prepared.docs.push_back(scale_label_counts(std::move(td), label_scale));
  }
  return prepared;
}

TrainedModel fit_model(PreparedCorpus prepared, ModelConfig config, std::uint32_t label_scale,
                       const SweepCallback& on_sweep) {
  config.dims.words = prepared.locations.size();
  config.dims.labels = prepared.labels.size();
  auto result = train(prepared.docs, config, on_sweep);
  TrainedModel model;
  model.hyper = config.hyper;
  model.globals = std::move(result.globals);
  model.locations = std::move(prepared.locations);
  model.labels = std::move(prepared.labels);
  model.label_scale = label_scale;
  model.seed = config.seed;
  model.sweeps = static_cast<std::uint32_t>(result.sweeps);
  model.elbo_trace = std::move(result.elbo_trace);
  return model;
}

IbtmPredictor::IbtmPredictor(ModelConfig config, std::size_t vocab_size,
                             std::uint32_t label_scale, double bandwidth)
    : config_(std::move(config)),
      vocab_size_(vocab_size),
      label_scale_(label_scale),
      bandwidth_(bandwidth) {}

double IbtmPredictor::fit(const Corpus& train, std::uint64_t seed) {
  ModelConfig config = config_;
  config.seed = seed;
  model_ = std::make_unique<TrainedModel>(
      fit_model(prepare_training(train, vocab_size_, label_scale_, seed), config, label_scale_));
  return model_->elbo_trace.back();
}

std::vector<std::string> IbtmPredictor::predict(const Document& doc) const {
  if (!model_) throw InvalidArgument("predictor has not been fitted");
  std::vector<std::string> out;
  if (doc.points.empty()) return out;
  for (auto& r : ibtm::predict(doc.points, *model_, bandwidth_).ranked) out.push_back(std::move(r.label));
  return out;
}

double RandomPredictor::fit(const Corpus& train, std::uint64_t seed) {
  labels_ = build_label_vocab(train).labels();
  seed_ = seed;
  return 0.0;
}

std::vector<std::string> RandomPredictor::predict(const Document& doc) const {
  std::seed_seq seq(doc.id.begin(), doc.id.end());
  std::mt19937_64 rng(seq);
  rng.discard(seed_ % 1024);
  std::vector<std::string> pool = labels_;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(budget_, pool.size()));
  return pool;
}

}  // namespace ibtm
