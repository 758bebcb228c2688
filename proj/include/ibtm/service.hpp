#pragma once

// HTTP API over one immutable TrainedModel.
//
//   POST /v1/predict   {"points": [...], "bandwidth"?: number}
//   POST /v1/generate  {"label": string, "n_top"?: integer}
//   GET  /v1/labels
//   GET  /v1/model
//   GET  /healthz

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "ibtm/featurize.hpp"
#include "ibtm/model_io.hpp"
#include "ibtm/predict.hpp"

namespace ibtm {

struct ServiceOptions {
  double bandwidth = kDefaultBandwidth;
  std::filesystem::path audit_log;   // empty: nothing is persisted
  std::filesystem::path static_dir;  // empty: no static assets under /
  std::string cors_origin = "*";
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// JSON body of a /v1/predict response.
std::string prediction_json(const Prediction& prediction, const TrainedModel& model,
                            const std::string& training_id);

class PredictionService {
 public:
  PredictionService(TrainedModel model, std::string training_id, ServiceOptions options = {});
  ~PredictionService();
  PredictionService(const PredictionService&) = delete;
  PredictionService& operator=(const PredictionService&) = delete;

  /// Loads a model file; the training id is the hex CRC of the file body.
  static std::unique_ptr<PredictionService> from_file(const std::filesystem::path& model_path,
                                                      ServiceOptions options = {});

  /// Transport-independent dispatch used by the HTTP handlers.
  HttpReply handle(std::string_view method, std::string_view path, std::string_view body) const;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

  const TrainedModel& model() const noexcept { return model_; }
  const std::string& training_id() const noexcept { return training_id_; }

 private:
  struct Server;
  HttpReply predict_endpoint(std::string_view body) const;
  HttpReply generate_endpoint(std::string_view body) const;
  void audit(std::string_view endpoint, std::string_view body, int status) const;

  TrainedModel model_;
  std::string training_id_;
  ServiceOptions options_;
  std::unique_ptr<Server> server_;
};

}  // namespace ibtm
