#pragma once

// Binary containers, all little-endian:
//
//   vocabulary  "IBTMVOC1" | u32 V | V x (f64 x, f64 y)
//
//   model       "IBTMMDL1" | u32 K T S V L | 11 x f64 hyperparameters
//               (alpha shared/word-private/label-private, sigma word-shared/
//               word-private/label-shared/label-private, word share a b,
//               label share a b)
//               | shared-word, private-word, shared-label, private-label
//                 matrices (row-major f64 variational parameters)
//               | embedded vocabulary container
//               | u32 label count, then per label u32 byte length + UTF-8 bytes
//               | u32 label scale | u64 seed | u32 sweeps
//               | u32 trace length + f64 ELBO per sweep
//               | u32 CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ibtm/corpus.hpp"
#include "ibtm/featurize.hpp"
#include "ibtm/model.hpp"

namespace ibtm {

struct TrainedModel {
  HyperParams hyper;
  GlobalTopics globals;
  LocationVocab locations;
  LabelVocab labels;
  std::uint32_t label_scale = 10;
  std::uint64_t seed = 0;
  std::uint32_t sweeps = 0;
  std::vector<double> elbo_trace;

  ModelDims dims() const noexcept { return globals.dims(); }
};

std::string encode_vocab(const LocationVocab& vocab);
LocationVocab decode_vocab(const std::string& bytes);
void save_vocab(const LocationVocab& vocab, const std::filesystem::path& path);
LocationVocab load_vocab(const std::filesystem::path& path);

std::string encode_model(const TrainedModel& model);
/// Throws FormatError on a bad magic, truncation, inconsistent sizes or a CRC mismatch.
TrainedModel decode_model(const std::string& bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::string& bytes);

}  // namespace ibtm
