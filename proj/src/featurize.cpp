#include "ibtm/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "ibtm/error.hpp"

namespace ibtm {

namespace {

constexpr double kCentroidTol = 1e-9;
constexpr std::size_t kMaxLloydIterations = 300;
constexpr double kShiftTol = 1e-6;
constexpr std::size_t kMaxShiftIterations = 500;

double sq_dist(const Point2& a, const Point2& b) noexcept {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

std::vector<Point2> kmeans_pp_seed(const std::vector<Point2>& pts, std::size_t k,
                                   std::mt19937_64& rng) {
  std::vector<Point2> centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], centers[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    const double target = unit(rng) * total;
    double acc = 0.0;
    std::size_t chosen = pts.size();
    std::size_t last_positive = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      acc += d2[i];
      if (acc > target) {
        chosen = i;
        break;
      }
    }
    if (chosen == pts.size()) chosen = last_positive;  // rounding at the tail
    centers.push_back(pts[chosen]);
    for (std::size_t i = 0; i < pts.size(); ++i)
      d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
  }
  return centers;
}

// Uniform grid over one view with cell size = bandwidth, for window queries.
class Grid {
 public:
  Grid(const std::vector<Point2>& pts, double cell) : pts_(pts), cell_(cell) {
    double max_x = 0.0, max_y = 0.0;
    for (const auto& p : pts) {
      max_x = std::max(max_x, p[0]);
      max_y = std::max(max_y, p[1]);
    }
    nx_ = static_cast<std::size_t>(max_x / cell) + 1;
    ny_ = static_cast<std::size_t>(max_y / cell) + 1;
    cells_.resize(nx_ * ny_);
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[index(pts[i])].push_back(i);
  }

  // Mean of all points within `radius` of `c`; false when the window is empty.
  bool window_mean(const Point2& c, double radius, Point2& mean, std::size_t& count) const {
    const double r2 = radius * radius;
    const auto cx = static_cast<long>(std::floor(c[0] / cell_));
    const auto cy = static_cast<long>(std::floor(c[1] / cell_));
    double sx = 0.0, sy = 0.0;
    count = 0;
    for (long gx = cx - 1; gx <= cx + 1; ++gx) {
      if (gx < 0 || gx >= static_cast<long>(nx_)) continue;
      for (long gy = cy - 1; gy <= cy + 1; ++gy) {
        if (gy < 0 || gy >= static_cast<long>(ny_)) continue;
        for (std::size_t i : cells_[static_cast<std::size_t>(gx) * ny_ + static_cast<std::size_t>(gy)]) {
          if (sq_dist(pts_[i], c) <= r2) {
            sx += pts_[i][0];
            sy += pts_[i][1];
            ++count;
          }
        }
      }
    }
    if (count == 0) return false;
    mean = {sx / static_cast<double>(count), sy / static_cast<double>(count)};
    return true;
  }

 private:
  std::size_t index(const Point2& p) const {
    auto gx = std::min(static_cast<std::size_t>(p[0] / cell_), nx_ - 1);
    auto gy = std::min(static_cast<std::size_t>(p[1] / cell_), ny_ - 1);
    return gx * ny_ + gy;
  }

  const std::vector<Point2>& pts_;
  double cell_;
  std::size_t nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> cells_;
};

void shift_view(std::vector<Point2> pts, View view, double bandwidth, RegionCount& out) {
  if (pts.empty()) return;
  std::sort(pts.begin(), pts.end());
  Grid grid(pts, bandwidth);
  const double merge2 = (bandwidth / 2) * (bandwidth / 2);
  std::vector<RegionMode> modes;
  for (const auto& start : pts) {
    Point2 cur = start;
    for (std::size_t it = 0; it < kMaxShiftIterations; ++it) {
      Point2 next;
      std::size_t count = 0;
      if (!grid.window_mean(cur, bandwidth, next, count)) break;
      const double shift = std::sqrt(sq_dist(next, cur));
      cur = next;
      if (shift < kShiftTol) break;
    }
    auto hit = std::find_if(modes.begin(), modes.end(), [&](const RegionMode& m) {
      return sq_dist({m.x, m.y}, cur) <= merge2;
    });
    if (hit != modes.end()) {
      ++hit->support;
    } else {
      modes.push_back({view, cur[0], cur[1], 1});
    }
  }
  out.clusters.insert(out.clusters.end(), modes.begin(), modes.end());
}

}  // namespace

Point2 LocationVocab::embed(const DrawingPoint& p) const noexcept {
  return {p.view == View::back ? p.x + view_offset : p.x, p.y};
}

DrawingPoint LocationVocab::unembed(std::size_t word) const {
  const auto& c = centroids.at(word);
  DrawingPoint p;
  if (c[0] >= view_offset) {
    p.view = View::back;
    p.x = c[0] - view_offset;
  } else {
    p.x = c[0];
  }
  p.x = std::clamp(p.x, 0.0, 1.0);
  p.y = std::clamp(c[1], 0.0, 1.0);
  return p;
}

std::uint32_t LocationVocab::nearest(const Point2& embedded) const {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t k = 0; k < centroids.size(); ++k) {
    const double d = sq_dist(embedded, centroids[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

LocationVocab build_location_vocab(std::span<const DrawingPoint> points, std::size_t size,
                                   std::uint64_t seed, KMeansStats* stats, double view_offset) {
  if (size == 0) throw InvalidArgument("vocabulary size must be >= 1");
  LocationVocab vocab;
  vocab.view_offset = view_offset;
  std::vector<Point2> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back(vocab.embed(p));
  const std::set<Point2> distinct(pts.begin(), pts.end());
  if (distinct.size() < size)
    throw InvalidArgument("need at least " + std::to_string(size) +
                          " distinct drawing points for the location vocabulary, got " +
                          std::to_string(distinct.size()));

  std::mt19937_64 rng(seed);
  vocab.centroids = kmeans_pp_seed(pts, size, rng);

  std::vector<std::uint32_t> assign(pts.size());
  std::vector<Point2> sums(size);
  std::vector<std::size_t> counts(size);
  std::size_t iter = 0;
  for (; iter < kMaxLloydIterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      assign[i] = vocab.nearest(pts[i]);
      inertia += sq_dist(pts[i], vocab.centroids[assign[i]]);
    }
    if (stats) stats->inertia.push_back(inertia);

    std::fill(sums.begin(), sums.end(), Point2{0.0, 0.0});
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sums[assign[i]][0] += pts[i][0];
      sums[assign[i]][1] += pts[i][1];
      ++counts[assign[i]];
    }
    double motion = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      if (counts[k] == 0) continue;  // empty cluster keeps its centroid
      const auto n = static_cast<double>(counts[k]);
      const Point2 next{sums[k][0] / n, sums[k][1] / n};
      motion = std::max(motion, std::sqrt(sq_dist(next, vocab.centroids[k])));
      vocab.centroids[k] = next;
    }
    if (motion < kCentroidTol) {
      ++iter;
      break;
    }
  }
  if (stats) stats->iterations = iter;
  return vocab;
}

BagOfWords encode_drawing(std::span<const DrawingPoint> points, const LocationVocab& vocab) {
  if (points.empty()) throw InvalidArgument("drawing has no points");
  if (vocab.size() == 0) throw InvalidArgument("location vocabulary is empty");
  std::vector<std::uint32_t> counts(vocab.size(), 0);
  for (const auto& p : points) ++counts[vocab.nearest(vocab.embed(p))];
  BagOfWords bag;
  for (std::uint32_t w = 0; w < counts.size(); ++w) {
    if (counts[w] == 0) continue;
    bag.counts.push_back({w, counts[w]});
    bag.total += counts[w];
  }
  return bag;
}

RegionCount count_regions(std::span<const DrawingPoint> points, double bandwidth) {
  if (points.empty()) throw InvalidArgument("drawing has no points");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidArgument("bandwidth must be positive");
  std::vector<Point2> front, back;
  for (const auto& p : points) (p.view == View::back ? back : front).push_back({p.x, p.y});
  RegionCount out;
  shift_view(std::move(front), View::front, bandwidth, out);
  shift_view(std::move(back), View::back, bandwidth, out);
  out.n = out.clusters.size();
  return out;
}

std::size_t label_budget(std::size_t n_clusters) noexcept {
  const std::size_t twice = n_clusters > kMaxLabels ? kMaxLabels : 2 * n_clusters;
  return std::clamp(twice, kMinLabels, kMaxLabels);
}

}  // namespace ibtm
