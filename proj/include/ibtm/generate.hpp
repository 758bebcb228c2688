#pragma once

// Typical drawing for a diagnostic label: infer the shared topic mixture from
// the label alone and show the most probable location words.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ibtm/corpus.hpp"
#include "ibtm/model.hpp"
#include "ibtm/model_io.hpp"

namespace ibtm {

inline constexpr std::size_t kDefaultTopLocations = 10;

struct WeightedLocation {
  View view = View::front;
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;  // p(w) / max p(w)
  std::uint32_t word = 0;
};

struct SyntheticDrawing {
  std::vector<WeightedLocation> locations;  // weights descending
  std::string label;
};

/// E-step with only the label view: the label token is repeated
/// `model.label_scale` times. Throws NotFound naming an unknown label.
DocPosterior infer_from_label(std::string_view label, const TrainedModel& model);

/// p(w) = sum_k E[theta_k] * E[beta_kw]; shared topics only.
std::vector<double> word_distribution(const DocPosterior& posterior, const GlobalTopics& globals);

/// The `n_top` most probable words mapped back to drawing coordinates. Ties
/// in probability keep the lower word id first.
SyntheticDrawing top_locations(const DocPosterior& posterior, const TrainedModel& model,
                               std::size_t n_top = kDefaultTopLocations);

/// infer_from_label followed by top_locations, with the label recorded.
SyntheticDrawing generate_drawing(std::string_view label, const TrainedModel& model,
                                 std::size_t n_top = kDefaultTopLocations);

/// Body outline per view as SVG path data in normalized coordinates.
struct ContourAsset {
  std::string front;
  std::string back;
};

/// Lines "front<TAB>path" and "back<TAB>path"; '#' comments allowed.
/// Throws NotFound when the file is missing.
ContourAsset load_contour(const std::filesystem::path& path);

/// Two-panel SVG: contour paths plus one circle per location with
/// fill-opacity equal to its weight. Output bytes depend only on the inputs.
std::string render_heatmap(const SyntheticDrawing& drawing, const ContourAsset& contour);

}  // namespace ibtm
