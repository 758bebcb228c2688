#include "ibtm/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ibtm/error.hpp"

namespace ibtm {

namespace {

constexpr double kPanelWidth = 200.0;
constexpr double kPanelHeight = 400.0;
constexpr double kPanelGap = 40.0;
constexpr double kMargin = 20.0;
constexpr double kCircleRadius = 9.0;

std::string escape_xml(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double panel_left(View view) {
  return kMargin + (view == View::back ? kPanelWidth + kPanelGap : 0.0);
}

}  // namespace

DocPosterior infer_from_label(std::string_view label, const TrainedModel& model) {
  const auto id = model.labels.find(label);
  if (!id) throw NotFound("unknown label '" + std::string(label) + "'");
  TokenDoc doc;
  doc.labels.push_back({*id, model.label_scale});
  return e_step_document(doc, model.globals, model.hyper);
}

std::vector<double> word_distribution(const DocPosterior& posterior, const GlobalTopics& globals) {
  const auto theta = posterior.shared_mean();
  const Matrix beta = globals.shared_words.expected();
  if (theta.size() != beta.rows()) throw InvalidArgument("posterior does not match the model");
  std::vector<double> p(beta.cols(), 0.0);
  for (std::size_t w = 0; w < beta.cols(); ++w)
    for (std::size_t k = 0; k < theta.size(); ++k) p[w] += theta[k] * beta(k, w);
  return p;
}

SyntheticDrawing top_locations(const DocPosterior& posterior, const TrainedModel& model,
                               std::size_t n_top) {
  const auto p = word_distribution(posterior, model.globals);
  std::vector<std::uint32_t> order(p.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return p[a] > p[b]; });
  order.resize(std::min(n_top, order.size()));
  SyntheticDrawing drawing;
  if (order.empty()) return drawing;
  const double top = p[order.front()];
  for (auto w : order) {
    const DrawingPoint at = model.locations.unembed(w);
    drawing.locations.push_back({at.view, at.x, at.y, p[w] / top, w});
  }
  return drawing;
}

SyntheticDrawing generate_drawing(std::string_view label, const TrainedModel& model,
                                 std::size_t n_top) {
  auto drawing = top_locations(infer_from_label(label, model), model, n_top);
  drawing.label = model.labels.label(*model.labels.find(label));
  return drawing;
}

ContourAsset load_contour(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("contour asset not found: " + path.string());
  ContourAsset asset;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const auto key = line.substr(0, tab);
    if (key == "front") asset.front = line.substr(tab + 1);
    if (key == "back") asset.back = line.substr(tab + 1);
  }
  if (asset.front.empty() || asset.back.empty())
    throw FormatError("contour asset needs front and back paths: " + path.string());
  return asset;
}

std::string render_heatmap(const SyntheticDrawing& drawing, const ContourAsset& contour) {
  const double width = 2 * kMargin + 2 * kPanelWidth + kPanelGap;
  const double height = 2 * kMargin + kPanelHeight;
  char buf[256];
  std::ostringstream svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg << buf;
  if (!drawing.label.empty()) svg << "<title>" << escape_xml(drawing.label) << "</title>\n";
  for (View view : {View::front, View::back}) {
    std::snprintf(buf, sizeof buf, "<g transform=\"translate(%.1f %.1f) scale(%.1f %.1f)\">",
                  panel_left(view), kMargin, kPanelWidth, kPanelHeight);
    svg << buf << "<path class=\"contour\" d=\""
        << escape_xml(view == View::front ? contour.front : contour.back)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\" "
           "vector-effect=\"non-scaling-stroke\"/></g>\n";
  }
  for (const auto& loc : drawing.locations) {
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.1f\" fill=\"#d62728\" "
                  "fill-opacity=\"%.4f\"/>\n",
                  panel_left(loc.view) + loc.x * kPanelWidth, kMargin + loc.y * kPanelHeight,
                  kCircleRadius, loc.weight);
    svg << buf;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ibtm
