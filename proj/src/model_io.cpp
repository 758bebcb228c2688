#include "ibtm/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "ibtm/error.hpp"

namespace ibtm {

namespace {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

constexpr char kVocabMagic[] = "IBTMVOC1";
constexpr char kModelMagic[] = "IBTMMDL1";
constexpr std::size_t kMagicLen = 8;

class Writer {
 public:
  void magic(const char* m) { out_.append(m, kMagicLen); }
  template <class T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void u32(std::size_t v) {
    if (v > UINT32_MAX) throw FormatError("value does not fit in u32");
    put<std::uint32_t>(static_cast<std::uint32_t>(v));
  }
  void matrix(const Matrix& m) {
    for (double v : m.data()) put<double>(v);
  }
  void bytes(const std::string& s) { out_ += s; }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  void magic(const char* m, const char* what) {
    need(kMagicLen);
    if (bytes_.compare(pos_, kMagicLen, m) != 0) throw FormatError(std::string("bad ") + what + " magic");
    pos_ += kMagicLen;
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  Matrix matrix(std::size_t rows, std::size_t cols) {
    if (cols && rows > (end_ - pos_) / sizeof(double) / cols) throw FormatError("truncated matrix");
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = get<double>();
    return m;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw FormatError("truncated container");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_vocab(Writer& w, const LocationVocab& vocab) {
  if (vocab.view_offset != kDefaultViewOffset)
    throw FormatError("only the default view offset can be stored");
  w.magic(kVocabMagic);
  w.u32(vocab.size());
  for (const auto& c : vocab.centroids) {
    w.put<double>(c[0]);
    w.put<double>(c[1]);
  }
}

LocationVocab read_vocab(Reader& r) {
  r.magic(kVocabMagic, "vocabulary");
  const std::uint32_t n = r.u32();
  LocationVocab vocab;
  Matrix raw = r.matrix(n, 2);
  vocab.centroids.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) vocab.centroids[i] = {raw(i, 0), raw(i, 1)};
  return vocab;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFound("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::uint32_t crc32_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string encode_vocab(const LocationVocab& vocab) {
  Writer w;
  write_vocab(w, vocab);
  return std::move(w.str());
}

LocationVocab decode_vocab(const std::string& bytes) {
  Reader r(bytes, bytes.size());
  auto vocab = read_vocab(r);
  if (r.pos() != bytes.size()) throw FormatError("trailing bytes after vocabulary");
  return vocab;
}

void save_vocab(const LocationVocab& vocab, const std::filesystem::path& path) {
  dump(encode_vocab(vocab), path);
}

LocationVocab load_vocab(const std::filesystem::path& path) { return decode_vocab(slurp(path)); }

std::string encode_model(const TrainedModel& model) {
  const ModelDims d = model.dims();
  if (model.locations.size() != d.words)
    throw FormatError("location vocabulary size does not match the model");
  if (model.labels.size() != d.labels)
    throw FormatError("label vocabulary size does not match the model");
  Writer w;
  w.magic(kModelMagic);
  w.u32(d.shared);
  w.u32(d.word_private);
  w.u32(d.label_private);
  w.u32(d.words);
  w.u32(d.labels);
  const auto& h = model.hyper;
  for (double v : {h.alpha_shared, h.alpha_word_private, h.alpha_label_private,
                   h.sigma_word_shared, h.sigma_word_private, h.sigma_label_shared,
                   h.sigma_label_private, h.word_share.a, h.word_share.b, h.label_share.a,
                   h.label_share.b})
    w.put<double>(v);
  w.matrix(model.globals.shared_words.param);
  w.matrix(model.globals.private_words.param);
  w.matrix(model.globals.shared_labels.param);
  w.matrix(model.globals.private_labels.param);
  write_vocab(w, model.locations);
  w.u32(model.labels.size());
  for (const auto& l : model.labels.labels()) {
    w.u32(l.size());
    w.bytes(l);
  }
  w.u32(model.label_scale);
  w.put<std::uint64_t>(model.seed);
  w.u32(model.sweeps);
  w.u32(model.elbo_trace.size());
  for (double e : model.elbo_trace) w.put<double>(e);
  const std::uint32_t crc = crc32_of(w.str());
  w.put<std::uint32_t>(crc);
  return std::move(w.str());
}

TrainedModel decode_model(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 4) throw FormatError("model file too short");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc32_of(bytes.substr(0, body)) != stored) throw FormatError("model file CRC mismatch");

  Reader r(bytes, body);
  r.magic(kModelMagic, "model");
  ModelDims d;
  d.shared = r.u32();
  d.word_private = r.u32();
  d.label_private = r.u32();
  d.words = r.u32();
  d.labels = r.u32();

  TrainedModel model;
  auto& h = model.hyper;
  for (double* v : {&h.alpha_shared, &h.alpha_word_private, &h.alpha_label_private,
                    &h.sigma_word_shared, &h.sigma_word_private, &h.sigma_label_shared,
                    &h.sigma_label_private, &h.word_share.a, &h.word_share.b, &h.label_share.a,
                    &h.label_share.b})
    *v = r.get<double>();
  h.validate();

  auto block = [&](std::size_t rows, std::size_t cols) {
    TopicBlock b;
    b.param = r.matrix(rows, cols);
    for (double v : b.param.data())
      if (!(v > 0.0)) throw FormatError("topic parameters must be positive");
    return b;
  };
  model.globals.shared_words = block(d.shared, d.words);
  model.globals.private_words = block(d.word_private, d.words);
  model.globals.shared_labels = block(d.shared, d.labels);
  model.globals.private_labels = block(d.label_private, d.labels);
  model.globals.refresh();

  model.locations = read_vocab(r);
  if (model.locations.size() != d.words) throw FormatError("embedded vocabulary size mismatch");

  const std::uint32_t n_labels = r.u32();
  if (n_labels != d.labels) throw FormatError("label vocabulary size mismatch");
  std::vector<std::string> labels;
  labels.reserve(n_labels);
  for (std::uint32_t i = 0; i < n_labels; ++i) labels.push_back(r.string(r.u32()));
  model.labels = LabelVocab(labels);
  if (model.labels.labels() != labels) throw FormatError("label vocabulary is not canonical");

  model.label_scale = r.u32();
  model.seed = r.get<std::uint64_t>();
  model.sweeps = r.u32();
  const std::uint32_t n_trace = r.u32();
  if (n_trace > (body - r.pos()) / sizeof(double)) throw FormatError("truncated ELBO trace");
  model.elbo_trace.resize(n_trace);
  for (auto& e : model.elbo_trace) e = r.get<double>();
  if (r.pos() != body) throw FormatError("trailing bytes in model file");
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  dump(encode_model(model), path);
}

TrainedModel load_model(const std::filesystem::path& path) { return decode_model(slurp(path)); }

}  // namespace ibtm
