#include <doctest.h>

#include <cstring>
#include <fstream>

#include "ibtm/error.hpp"
#include "ibtm/model_io.hpp"
#include "ibtm/sampler.hpp"
#include "support.hpp"

using namespace ibtm;

namespace {

TrainedModel small_model() {
  ModelConfig c;
  c.dims = {3, 2, 1, 12, 4};
  c.seed = 8;
  c.max_sweeps = 5;
  auto docs = test::random_docs(10, 12, 4, 3, 20, 2, 10);
  auto result = train(docs, c);
  TrainedModel m;
  m.hyper = c.hyper;
  m.hyper.word_share = {2.5, 0.5};
  m.globals = result.globals;
  m.locations = synthetic_location_vocab(c.dims);
  m.labels = LabelVocab({"Lumbago", "R arm discomfort", "label ünicode", "z"});
  m.seed = 8;
  m.sweeps = static_cast<std::uint32_t>(result.sweeps);
  m.elbo_trace = result.elbo_trace;
  return m;
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

TEST_SUITE("model_io") {
  TEST_CASE("crc32 check value") {
    CHECK(crc32_of("123456789") == 0xCBF43926u);
    CHECK(crc32_of("") == 0u);
  }

  TEST_CASE("vocabulary container") {
    LocationVocab v;
    v.centroids = {{0.25, 0.5}, {1.75, 0.125}};
    const auto bytes = encode_vocab(v);
    CHECK(bytes.size() == 8 + 4 + 2 * 16);
    CHECK(bytes.substr(0, 8) == "IBTMVOC1");
    CHECK(read_u32(bytes, 8) == 2);
    double x;
    std::memcpy(&x, bytes.data() + 12 + 16, sizeof x);
    CHECK(x == 1.75);
    CHECK(decode_vocab(bytes) == v);
    CHECK_THROWS_AS(decode_vocab(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(decode_vocab(bytes + "x"), FormatError);
    CHECK_THROWS_AS(decode_vocab("IBTMVOC2" + bytes.substr(8)), FormatError);

    test::TempDir dir;
    save_vocab(v, dir / "v.bin");
    CHECK(load_vocab(dir / "v.bin") == v);
    CHECK_THROWS_AS(load_vocab(dir / "missing.bin"), NotFound);
    LocationVocab shifted = v;
    shifted.view_offset = 2.0;
    CHECK_THROWS_AS(encode_vocab(shifted), FormatError);
  }

  TEST_CASE("model round trip") {
    const auto m = small_model();
    const auto bytes = encode_model(m);
    CHECK(bytes.substr(0, 8) == "IBTMMDL1");
    CHECK(read_u32(bytes, 8) == 3);
    CHECK(read_u32(bytes, 12) == 2);
    CHECK(read_u32(bytes, 16) == 1);
    CHECK(read_u32(bytes, 20) == 12);
    CHECK(read_u32(bytes, 24) == 4);
    CHECK(read_u32(bytes, bytes.size() - 4) == crc32_of(bytes.substr(0, bytes.size() - 4)));

    const auto back = decode_model(bytes);
    CHECK(back.hyper == m.hyper);
    CHECK(back.globals == m.globals);
    CHECK(back.locations == m.locations);
    CHECK(back.labels == m.labels);
    CHECK(back.label_scale == m.label_scale);
    CHECK(back.seed == m.seed);
    CHECK(back.sweeps == m.sweeps);
    CHECK(back.elbo_trace == m.elbo_trace);
    // Expected-log caches are rebuilt on load.
    CHECK(back.globals.shared_words.elog == m.globals.shared_words.elog);
    CHECK(encode_model(back) == bytes);

    test::TempDir dir;
    save_model(m, dir / "m.bin");
    CHECK(encode_model(load_model(dir / "m.bin")) == bytes);
  }

  TEST_CASE("corruption and truncation are detected") {
    const auto bytes = encode_model(small_model());
    for (std::size_t pos : {std::size_t{3}, std::size_t{30}, bytes.size() / 2, bytes.size() - 2}) {
      auto bad = bytes;
      bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
      CHECK_THROWS_AS(decode_model(bad), FormatError);
    }
    for (std::size_t len : {std::size_t{0}, std::size_t{7}, std::size_t{40}, bytes.size() - 1})
      CHECK_THROWS_AS(decode_model(bytes.substr(0, len)), FormatError);
    CHECK_THROWS_AS(decode_model(bytes + std::string(4, '\0')), FormatError);
  }
}
