#pragma once

// Drawing featurization: a K-means location vocabulary that turns shaded
// points into bag-of-location-words, and mean-shift region counting that sets
// the number of labels to predict.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ibtm/corpus.hpp"

namespace ibtm {

inline constexpr std::size_t kDefaultVocabSize = 256;
inline constexpr double kDefaultViewOffset = 1.0;
inline constexpr double kDefaultBandwidth = 0.08;
inline constexpr std::size_t kMinLabels = 5;
inline constexpr std::size_t kMaxLabels = 50;

using Point2 = std::array<double, 2>;

/// K-means centroids in the embedded plane: front points keep x, back points
/// are shifted right by `view_offset`. The centroid index is the word id.
struct LocationVocab {
  std::vector<Point2> centroids;
  double view_offset = kDefaultViewOffset;

  std::size_t size() const noexcept { return centroids.size(); }
  Point2 embed(const DrawingPoint& p) const noexcept;
  /// Maps a centroid back to (view, x, y); x is clamped into [0,1].
  DrawingPoint unembed(std::size_t word) const;
  /// Nearest centroid by Euclidean distance, ties to the lowest index.
  std::uint32_t nearest(const Point2& embedded) const;

  bool operator==(const LocationVocab&) const = default;
};

struct KMeansStats {
  std::vector<double> inertia;  // sum of squared distances after each assignment step
  std::size_t iterations = 0;
};

/// Lloyd's K-means with k-means++ seeding. Stops when no centroid moves more
/// than 1e-9 or after 300 iterations. Deterministic for a given seed.
/// Throws InvalidArgument when there are fewer distinct embedded points than `size`.
LocationVocab build_location_vocab(std::span<const DrawingPoint> points,
                                   std::size_t size = kDefaultVocabSize, std::uint64_t seed = 0,
                                   KMeansStats* stats = nullptr,
                                   double view_offset = kDefaultViewOffset);

struct BagOfWords {
  std::vector<TokenCount> counts;  // sorted by word id, no zero entries
  std::uint64_t total = 0;

  bool operator==(const BagOfWords&) const = default;
};

/// Quantizes each point to its nearest centroid. Intensity is ignored.
/// Throws InvalidArgument on an empty point list.
BagOfWords encode_drawing(std::span<const DrawingPoint> points, const LocationVocab& vocab);

struct RegionMode {
  View view = View::front;
  double x = 0.0;
  double y = 0.0;
  std::size_t support = 0;  // number of points converging to this mode
};

struct RegionCount {
  std::vector<RegionMode> clusters;
  std::size_t n = 0;
};

/// Flat-kernel mean shift run separately on each view. Modes closer than
/// bandwidth / 2 are merged. Result does not depend on input order.
RegionCount count_regions(std::span<const DrawingPoint> points, double bandwidth = kDefaultBandwidth);

/// clamp(2 * n_clusters, 5, 50)
std::size_t label_budget(std::size_t n_clusters) noexcept;

}  // namespace ibtm
