#pragma once

// Corpus data model, the line-delimited corpus file format and diagnostic
// label preprocessing (translation, exchangeable labels, bilateral split).

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ibtm {

enum class View : std::uint8_t { front = 0, back = 1 };

std::string_view to_string(View view) noexcept;
std::optional<View> parse_view(std::string_view text) noexcept;

/// One shaded sample on the body contour. Coordinates are fractions of the
/// contour box, y = 0 at the top of the head.
struct DrawingPoint {
  View view = View::front;
  double x = 0.0;
  double y = 0.0;
  double intensity = 1.0;

  bool operator==(const DrawingPoint&) const = default;
};

struct Document {
  std::string id;
  std::vector<DrawingPoint> points;
  std::vector<std::string> labels;

  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::string language = "en";
  std::vector<Document> documents;

  std::size_t size() const noexcept { return documents.size(); }
  bool operator==(const Corpus&) const = default;
};

/// Throws ParseError (with the 1-based line) on malformed records, duplicate ids,
/// out-of-range coordinates, or an empty stream.
Corpus parse_corpus(std::istream& in);
Corpus read_corpus(const std::filesystem::path& path);

/// Writes the header line followed by one record per document.
void serialize_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Validates a single point; `where` prefixes the error message.
void validate_point(const DrawingPoint& point, const std::string& where);

// ---------------------------------------------------------------------------
// Label text handling

/// Trims and collapses internal whitespace runs to a single space.
std::string normalize_whitespace(std::string_view text);

/// Case-folded, whitespace-normalized comparison key (ASCII folding).
std::string label_key(std::string_view text);

/// Case-insensitive string table loaded from a two-column TSV.
class TermTable {
 public:
  TermTable() = default;

  /// Parses `from<TAB>to` lines; blank lines and '#' comments are skipped.
  static TermTable parse(std::istream& in, const std::string& source = "term table");
  static TermTable load(const std::filesystem::path& path);

  void insert(std::string_view from, std::string_view to);
  const std::string* find(std::string_view term) const;
  std::size_t size() const noexcept { return entries_.size(); }

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, std::string> entries_;  // label_key(from) -> normalized to
};

/// Label rewriting tables. `exchangeable` maps alias -> canonical label,
/// `translation` source-language term -> English term, `singular` plural
/// token -> singular token (used after a bilateral split).
struct LabelMaps {
  TermTable exchangeable;
  TermTable translation;
  TermTable singular;

  /// Rejects exchange chains and cycles: a canonical label may not itself be
  /// an alias of a different label.
  void validate() const;

  /// Loads the three tables; any path may be empty to leave that table empty.
  static LabelMaps load(const std::filesystem::path& exchangeable,
                        const std::filesystem::path& translation,
                        const std::filesystem::path& singular);
};

/// "B hands discomfort" -> {"L hand discomfort", "R hand discomfort"};
/// labels whose first token is not "B" pass through unchanged.
std::vector<std::string> split_bilateral(std::string_view label, const TermTable& singular);

/// Translate (when `translate` is set) -> exchange -> bilateral split -> dedupe.
/// Lookups are attempted on the whole label and, for side-marked labels
/// ("B x", "L x", "R x"), on the remainder with the marker kept.
std::vector<std::string> normalize_labels(const std::vector<std::string>& labels,
                                          const LabelMaps& maps, bool translate = false);

/// Applies normalize_labels to every document; translation is enabled when the
/// corpus language is "sv".
Corpus normalize_corpus(Corpus corpus, const LabelMaps& maps);

// ---------------------------------------------------------------------------
// Label vocabulary and token counts

/// Bijection between label strings and 0..size()-1, lexicographic order.
class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::uint32_t> find(std::string_view label) const;

  bool operator==(const LabelVocab& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::uint32_t, std::less<>> index_;
};

/// Throws InvalidArgument when the corpus carries no labels at all.
LabelVocab build_label_vocab(const Corpus& corpus);

/// A token id and its multiplicity within one document.
struct TokenCount {
  std::uint32_t id = 0;
  std::uint32_t count = 0;

  bool operator==(const TokenCount&) const = default;
};

/// Bag-of-tokens document as consumed by the topic model.
struct TokenDoc {
  std::vector<TokenCount> words;
  std::vector<TokenCount> labels;

  std::uint64_t word_total() const noexcept;
  std::uint64_t label_total() const noexcept;
};

/// Multiplies every label count by `factor`; word counts are untouched.
/// Throws InvalidArgument for factor 0.
TokenDoc scale_label_counts(TokenDoc doc, std::uint32_t factor);

/// Label ids of a document (unknown labels are skipped), each with count 1.
std::vector<TokenCount> label_tokens(const Document& doc, const LabelVocab& vocab);

}  // namespace ibtm
