#include "ibtm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ibtm/error.hpp"

namespace ibtm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t from = 0) {
  std::string out;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool is_side_marker(std::string_view token) {
  return token == "B" || token == "L" || token == "R" || token == "b" || token == "l" ||
         token == "r";
}

// Whole-label lookup first, then the remainder of a side-marked label.
std::string rewrite(const std::string& label, const TermTable& table) {
  if (table.size() == 0) return label;
  if (const auto* hit = table.find(label)) return *hit;
  auto tokens = split_tokens(label);
  if (tokens.size() > 1 && is_side_marker(tokens[0])) {
    if (const auto* hit = table.find(join_tokens(tokens, 1))) return tokens[0] + ' ' + *hit;
  }
  return label;
}

double require_number(const ordered_json& obj, const char* key, const std::string& where,
                      std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw ParseError(where + "." + key + " must be a number", line);
  return it->get<double>();
}

Document parse_record(const ordered_json& rec, std::size_t line) {
  if (!rec.is_object()) throw ParseError("record must be a JSON object", line);
  Document doc;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw ParseError("field 'id' must be a string", line);
  doc.id = id->get<std::string>();

  auto pts = rec.find("points");
  if (pts == rec.end() || !pts->is_array())
    throw ParseError("field 'points' must be an array", line);
  doc.points.reserve(pts->size());
  for (std::size_t i = 0; i < pts->size(); ++i) {
    const auto& p = (*pts)[i];
    const std::string where = "points[" + std::to_string(i) + "]";
    if (!p.is_object()) throw ParseError(where + " must be an object", line);
    DrawingPoint point;
    auto view = p.find("view");
    if (view == p.end() || !view->is_string())
      throw ParseError(where + ".view must be \"front\" or \"back\"", line);
    auto parsed = parse_view(view->get<std::string>());
    if (!parsed) throw ParseError(where + ".view must be \"front\" or \"back\"", line);
    point.view = *parsed;
    point.x = require_number(p, "x", where, line);
    point.y = require_number(p, "y", where, line);
    point.intensity = p.contains("intensity") ? require_number(p, "intensity", where, line) : 1.0;
    try {
      validate_point(point, where);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line);
    }
    doc.points.push_back(point);
  }

  if (auto labels = rec.find("labels"); labels != rec.end()) {
    if (!labels->is_array()) throw ParseError("field 'labels' must be an array", line);
    for (std::size_t i = 0; i < labels->size(); ++i) {
      if (!(*labels)[i].is_string())
        throw ParseError("labels[" + std::to_string(i) + "] must be a string", line);
      doc.labels.push_back((*labels)[i].get<std::string>());
    }
  }
  return doc;
}

}  // namespace

std::string_view to_string(View view) noexcept { return view == View::back ? "back" : "front"; }

std::optional<View> parse_view(std::string_view text) noexcept {
  if (text == "front") return View::front;
  if (text == "back") return View::back;
  return std::nullopt;
}

void validate_point(const DrawingPoint& point, const std::string& where) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(point.x))
    throw InvalidArgument(where + ".x = " + std::to_string(point.x) + " out of range [0,1]");
  if (!in_unit(point.y))
    throw InvalidArgument(where + ".y = " + std::to_string(point.y) + " out of range [0,1]");
  if (!(point.intensity > 0.0 && point.intensity <= 1.0))
    throw InvalidArgument(where + ".intensity = " + std::to_string(point.intensity) +
                          " out of range (0,1]");
}

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  bool seen_content = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (normalize_whitespace(text).empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (rec.is_object() && rec.contains("format")) {
      if (seen_content) throw ParseError("header must be the first record", line);
      seen_content = true;
      if (rec["format"] != "ibtm-corpus") throw ParseError("unknown format tag", line);
      if (!rec.contains("version") || rec["version"] != 1)
        throw ParseError("unsupported corpus version", line);
      if (rec.contains("language")) {
        if (!rec["language"].is_string()) throw ParseError("language must be a string", line);
        corpus.language = rec["language"].get<std::string>();
        if (corpus.language != "sv" && corpus.language != "en")
          throw ParseError("language must be \"sv\" or \"en\"", line);
      }
      continue;
    }
    seen_content = true;
    Document doc = parse_record(rec, line);
    if (!ids.insert(doc.id).second) throw ParseError("duplicate id '" + doc.id + "'", line);
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw ParseError("empty corpus", 0);
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open corpus file: " + path.string());
  return parse_corpus(in);
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  ordered_json header;
  header["format"] = "ibtm-corpus";
  header["version"] = 1;
  header["language"] = corpus.language;
  out << header.dump() << '\n';
  for (const auto& doc : corpus.documents) {
    ordered_json rec;
    rec["id"] = doc.id;
    rec["points"] = ordered_json::array();
    for (const auto& p : doc.points) {
      ordered_json jp;
      jp["view"] = std::string(to_string(p.view));
      jp["x"] = p.x;
      jp["y"] = p.y;
      jp["intensity"] = p.intensity;
      rec["points"].push_back(std::move(jp));
    }
    rec["labels"] = doc.labels;
    out << rec.dump() << '\n';
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFound("cannot write corpus file: " + path.string());
  serialize_corpus(corpus, out);
}

std::string normalize_whitespace(std::string_view text) { return join_tokens(split_tokens(text)); }

std::string label_key(std::string_view text) {
  std::string out = normalize_whitespace(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

TermTable TermTable::parse(std::istream& in, const std::string& source) {
  TermTable table;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    auto trimmed = normalize_whitespace(text);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto tab = text.find('\t');
    if (tab == std::string::npos)
      throw ParseError(source + ": expected two tab-separated columns", line);
    auto from = normalize_whitespace(std::string_view(text).substr(0, tab));
    auto to = normalize_whitespace(std::string_view(text).substr(tab + 1));
    if (from.empty() || to.empty()) throw ParseError(source + ": empty column", line);
    table.insert(from, to);
  }
  return table;
}

TermTable TermTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open table: " + path.string());
  return parse(in, path.string());
}

void TermTable::insert(std::string_view from, std::string_view to) {
  entries_.insert_or_assign(label_key(from), normalize_whitespace(to));
}

const std::string* TermTable::find(std::string_view term) const {
  auto it = entries_.find(label_key(term));
  return it == entries_.end() ? nullptr : &it->second;
}

void LabelMaps::validate() const {
  for (const auto& [alias, canonical] : exchangeable.entries()) {
    const auto* next = exchangeable.find(canonical);
    if (next && label_key(*next) != label_key(canonical))
      throw InvalidArgument("exchangeable map chains '" + alias + "' -> '" + canonical +
                            "' -> '" + *next + "'");
  }
}

LabelMaps LabelMaps::load(const std::filesystem::path& exchangeable,
                          const std::filesystem::path& translation,
                          const std::filesystem::path& singular) {
  LabelMaps maps;
  if (!exchangeable.empty()) maps.exchangeable = TermTable::load(exchangeable);
  if (!translation.empty()) maps.translation = TermTable::load(translation);
  if (!singular.empty()) maps.singular = TermTable::load(singular);
  maps.validate();
  return maps;
}

std::vector<std::string> split_bilateral(std::string_view label, const TermTable& singular) {
  auto tokens = split_tokens(label);
  if (tokens.size() < 2 || (tokens[0] != "B" && tokens[0] != "b"))
    return {normalize_whitespace(label)};
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (const auto* single = singular.find(tokens[i])) {
      std::string replaced = *single;
      if (std::isupper(static_cast<unsigned char>(tokens[i][0])) && !replaced.empty())
        replaced[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replaced[0])));
      tokens[i] = std::move(replaced);
    }
  }
  auto rest = join_tokens(tokens, 1);
  return {"L " + rest, "R " + rest};
}

std::vector<std::string> normalize_labels(const std::vector<std::string>& labels,
                                          const LabelMaps& maps, bool translate) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& raw : labels) {
    std::string label = normalize_whitespace(raw);
    if (label.empty()) continue;
    if (translate) label = rewrite(label, maps.translation);
    label = rewrite(label, maps.exchangeable);
    for (auto& part : split_bilateral(label, maps.singular)) {
      if (seen.insert(label_key(part)).second) out.push_back(std::move(part));
    }
  }
  return out;
}

Corpus normalize_corpus(Corpus corpus, const LabelMaps& maps) {
  const bool translate = corpus.language == "sv";
  for (auto& doc : corpus.documents) doc.labels = normalize_labels(doc.labels, maps, translate);
  return corpus;
}

LabelVocab::LabelVocab(std::vector<std::string> labels) {
  for (auto& l : labels) {
    auto key = label_key(l);
    if (index_.contains(key)) continue;
    index_.emplace(std::move(key), 0);
    labels_.push_back(normalize_whitespace(l));
  }
  std::sort(labels_.begin(), labels_.end());
  for (std::uint32_t i = 0; i < labels_.size(); ++i) index_[label_key(labels_[i])] = i;
}

std::optional<std::uint32_t> LabelVocab::find(std::string_view label) const {
  auto it = index_.find(label_key(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelVocab build_label_vocab(const Corpus& corpus) {
  std::vector<std::string> all;
  for (const auto& doc : corpus.documents)
    for (const auto& l : doc.labels) all.push_back(l);
  LabelVocab vocab(std::move(all));
  if (vocab.size() == 0) throw InvalidArgument("label vocabulary is empty: corpus has no labels");
  return vocab;
}

std::uint64_t TokenDoc::word_total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& t : words) n += t.count;
  return n;
}

std::uint64_t TokenDoc::label_total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& t : labels) n += t.count;
  return n;
}

TokenDoc scale_label_counts(TokenDoc doc, std::uint32_t factor) {
  if (factor == 0) throw InvalidArgument("label scale factor must be >= 1");
  for (auto& t : doc.labels) t.count *= factor;
  return doc;
}

std::vector<TokenCount> label_tokens(const Document& doc, const LabelVocab& vocab) {
  std::vector<TokenCount> out;
  for (const auto& l : doc.labels) {
    auto id = vocab.find(l);
    if (!id) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const TokenCount& t) { return t.id == *id; });
    if (it == out.end()) out.push_back({*id, 1});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

}  // namespace ibtm
