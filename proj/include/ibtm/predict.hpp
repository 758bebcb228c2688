#pragma once

// Held-out label prediction from a drawing, the per-document F-measure and
// the repeated random-split evaluation protocol.

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ibtm/corpus.hpp"
#include "ibtm/featurize.hpp"
#include "ibtm/model.hpp"
#include "ibtm/model_io.hpp"

namespace ibtm {

struct ScoredLabel {
  std::uint32_t id = 0;
  double score = 0.0;
};

struct RankedLabel {
  std::string label;
  double score = 0.0;

  bool operator==(const RankedLabel&) const = default;
};

struct Prediction {
  std::vector<RankedLabel> ranked;  // top `budget` labels, scores descending
  std::size_t budget = 0;
  RegionCount regions;
};

/// E-step with only the word view. An empty bag yields the prior posterior.
DocPosterior infer_heldout(const BagOfWords& bag, const GlobalTopics& globals,
                           const HyperParams& hyper, const EStepOptions& options = {});

/// score(v) = sum_k E[theta_k] * E[eta_kv] over all labels, descending, ties
/// broken by ascending label id.
std::vector<ScoredLabel> rank_labels(const DocPosterior& posterior, const GlobalTopics& globals);

/// encode -> infer -> rank -> keep label_budget(count_regions(points)) labels.
Prediction predict(std::span<const DrawingPoint> points, const TrainedModel& model,
                   double bandwidth = kDefaultBandwidth);

struct FMeasure {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Set-based precision, recall and their harmonic mean; labels are compared
/// case-insensitively and duplicates ignored.
FMeasure f_measure(std::span<const std::string> predicted, std::span<const std::string> truth);

// ---------------------------------------------------------------------------
// Evaluation protocol

/// One model instance per (split, seed). `fit` returns the model-selection
/// score (higher is better, e.g. the final ELBO).
class SplitPredictor {
 public:
  virtual ~SplitPredictor() = default;
  virtual double fit(const Corpus& train, std::uint64_t seed) = 0;
  virtual std::vector<std::string> predict(const Document& doc) const = 0;
};

using PredictorFactory = std::function<std::unique_ptr<SplitPredictor>()>;

enum class SeedSelection { best_elbo, best_test_f };

struct EvalProtocol {
  std::size_t n_splits = 10;
  std::size_t n_seeds = 10;
  SeedSelection selection = SeedSelection::best_elbo;
  std::uint64_t seed = 0;  // split shuffles use seed + split; model seeds are seed + j
};

struct DocScore {
  std::string id;
  FMeasure score;
};

struct SplitResult {
  std::size_t split = 0;
  std::uint64_t seed = 0;  // selected model seed
  double selection_score = 0.0;
  double f = 0.0;  // macro average over test documents
  std::vector<DocScore> docs;
};

struct EvalReport {
  std::vector<SplitResult> splits;
  double mean_f = 0.0;
  double std_f = 0.0;  // sample standard deviation over splits (0 for one split)
  EvalProtocol protocol;
};

/// Throws InvalidArgument when the corpus has fewer than two documents.
EvalReport evaluate(const Corpus& corpus, const EvalProtocol& protocol,
                    const PredictorFactory& factory);

/// "split<TAB>seed<TAB>F" rows followed by "F = mean ± std".
void write_report(const EvalReport& report, std::ostream& out);

/// Fits the full pipeline (vocabularies, scaling, training) on each split.
class IbtmPredictor : public SplitPredictor {
 public:
  IbtmPredictor(ModelConfig config, std::size_t vocab_size, std::uint32_t label_scale,
                double bandwidth);
  double fit(const Corpus& train, std::uint64_t seed) override;
  std::vector<std::string> predict(const Document& doc) const override;
  const TrainedModel& model() const { return *model_; }

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  std::uint32_t label_scale_;
  double bandwidth_;
  std::unique_ptr<TrainedModel> model_;
};

/// Echoes the true labels back; harness sanity check.
class OracleEchoPredictor : public SplitPredictor {
 public:
  double fit(const Corpus&, std::uint64_t) override { return 0.0; }
  std::vector<std::string> predict(const Document& doc) const override { return doc.labels; }
};

/// Uniformly random labels from the training vocabulary, `budget` per document.
class RandomPredictor : public SplitPredictor {
 public:
  explicit RandomPredictor(std::size_t budget) : budget_(budget) {}
  double fit(const Corpus& train, std::uint64_t seed) override;
  std::vector<std::string> predict(const Document& doc) const override;

 private:
  std::size_t budget_;
  std::vector<std::string> labels_;
  std::uint64_t seed_ = 0;
};

/// Builds the training inputs shared by the CLI and IbtmPredictor: location
/// vocabulary, label vocabulary and scaled token documents.
struct PreparedCorpus {
  LocationVocab locations;
  LabelVocab labels;
  std::vector<TokenDoc> docs;
};

PreparedCorpus prepare_training(const Corpus& corpus, std::size_t vocab_size,
                                std::uint32_t label_scale, std::uint64_t seed);

/// Trains on a prepared corpus and bundles everything into a TrainedModel.
TrainedModel fit_model(PreparedCorpus prepared, ModelConfig config, std::uint32_t label_scale,
                       const SweepCallback& on_sweep = {});

}  // namespace ibtm
