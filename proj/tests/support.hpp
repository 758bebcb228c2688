#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "ibtm/corpus.hpp"
#include "ibtm/model_io.hpp"
#include "ibtm/sampler.hpp"

namespace ibtm::test {

inline std::filesystem::path data_path(const char* file) {
  return std::filesystem::path(IBTM_DATA_DIR) / file;
}

inline LabelMaps shipped_maps() {
  return LabelMaps::load(data_path("exchangeable.tsv"), data_path("sv_en.tsv"),
                         data_path("singular.tsv"));
}

/// Random token documents with `words_per_doc` word draws over V ids and
/// `labels_per_doc` distinct labels over L ids, each label counted `scale` times.
inline std::vector<TokenDoc> random_docs(std::size_t m, std::size_t V, std::size_t L,
                                         std::uint64_t seed, std::size_t words_per_doc = 30,
                                         std::size_t labels_per_doc = 2, std::uint32_t scale = 1) {
  std::mt19937_64 rng(seed);
  std::vector<TokenDoc> docs(m);
  for (auto& doc : docs) {
    std::vector<std::uint32_t> w(V, 0), l(L, 0);
    // Skew each document towards a random window of ids so topics have structure.
    const std::size_t start = rng() % V;
    for (std::size_t i = 0; i < words_per_doc; ++i) ++w[(start + rng() % (V / 3 + 1)) % V];
    for (std::size_t i = 0; i < labels_per_doc && L > 0; ++i) l[(start * L / V + rng() % 3) % L] = scale;
    for (std::uint32_t v = 0; v < V; ++v)
      if (w[v]) doc.words.push_back({v, w[v]});
    for (std::uint32_t v = 0; v < L; ++v)
      if (l[v]) doc.labels.push_back({v, l[v]});
  }
  return docs;
}

/// Hand-built model with `K` shared topics: topic k owns location words
/// [4k, 4k+4) (one body site each) and puts most label mass on label k, then
/// label k + K. Labels are named label_00 .. label_(L-1).
inline TrainedModel separable_model(std::size_t K = 4, std::size_t L = 40) {
  const ModelDims dims{K, 1, 1, 4 * K, L};
  TrainedModel m;
  ModelConfig c;
  c.dims = dims;
  c.init_jitter = 0.0;
  std::mt19937_64 rng(0);
  m.globals = init_globals(c, rng);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 4 * k; v < 4 * k + 4; ++v) m.globals.shared_words.param(k, v) += 500.0;
    m.globals.shared_labels.param(k, k) += 600.0;
    m.globals.shared_labels.param(k, k + K) += 300.0;
  }
  m.globals.refresh();
  m.hyper = c.hyper;
  m.locations = synthetic_location_vocab({K, 0, 0, 4 * K, L});
  std::vector<std::string> names;
  for (std::size_t i = 0; i < L; ++i) names.push_back(synthetic_label_name(i));
  m.labels = LabelVocab(names);
  m.seed = 1;
  m.sweeps = 1;
  m.elbo_trace = {-1.0};
  return m;
}

/// Points at the location words of shared topic k of `separable_model`.
inline std::vector<DrawingPoint> topic_drawing(const TrainedModel& m, std::size_t k) {
  std::vector<DrawingPoint> pts;
  for (std::size_t v = 4 * k; v < 4 * k + 4; ++v) pts.push_back(m.locations.unembed(v));
  return pts;
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ibtm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ibtm::test
