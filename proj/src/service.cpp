#include "ibtm/service.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

#include "ibtm/error.hpp"
#include "ibtm/generate.hpp"

namespace ibtm {

namespace {

using json = nlohmann::ordered_json;

HttpReply error_reply(int status, const std::string& message, const std::string& field = {}) {
  json body;
  body["error"] = message;
  if (!field.empty()) body["field"] = field;
  return {status, "application/json", body.dump()};
}

// Thrown while decoding a request body; carries the offending field.
struct BadRequest {
  std::string message;
  std::string field;
};

json parse_body(std::string_view body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw BadRequest{"request body is not valid JSON", {}};
  if (!parsed.is_object()) throw BadRequest{"request body must be a JSON object", {}};
  return parsed;
}

double number_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) throw BadRequest{"must be a number", where + "." + key};
  return it->get<double>();
}

std::vector<DrawingPoint> parse_points(const json& request) {
  auto it = request.find("points");
  if (it == request.end() || !it->is_array()) throw BadRequest{"must be an array", "points"};
  std::vector<DrawingPoint> points;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& p = (*it)[i];
    const std::string where = "points[" + std::to_string(i) + "]";
    if (!p.is_object()) throw BadRequest{"must be an object", where};
    DrawingPoint point;
    auto view = p.find("view");
    std::optional<View> parsed;
    if (view != p.end() && view->is_string()) parsed = parse_view(view->get<std::string>());
    if (!parsed) throw BadRequest{"must be \"front\" or \"back\"", where + ".view"};
    point.view = *parsed;
    point.x = number_field(p, "x", where);
    point.y = number_field(p, "y", where);
    point.intensity = p.contains("intensity") ? number_field(p, "intensity", where) : 1.0;
    try {
      validate_point(point, where);
    } catch (const InvalidArgument& e) {
      const std::string msg = e.what();
      throw BadRequest{msg, msg.substr(0, msg.find(' '))};
    }
    points.push_back(point);
  }
  return points;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

struct PredictionService::Server {
  httplib::Server http;
  mutable std::mutex audit_mutex;
};

std::string prediction_json(const Prediction& prediction, const TrainedModel& model,
                            const std::string& training_id) {
  json out;
  out["ranked"] = json::array();
  for (const auto& r : prediction.ranked) out["ranked"].push_back({{"label", r.label}, {"score", r.score}});
  out["budget"] = prediction.budget;
  out["regions"] = prediction.regions.n;
  out["clusters"] = json::array();
  for (const auto& c : prediction.regions.clusters)
    out["clusters"].push_back({{"view", std::string(to_string(c.view))},
                               {"x", c.x},
                               {"y", c.y},
                               {"support", c.support}});
  out["model"] = {{"K", model.dims().shared}, {"training_id", training_id}};
  return out.dump();
}

PredictionService::PredictionService(TrainedModel model, std::string training_id,
                                     ServiceOptions options)
    : model_(std::move(model)),
      training_id_(std::move(training_id)),
      options_(std::move(options)),
      server_(std::make_unique<Server>()) {
  if (!(options_.bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
}

PredictionService::~PredictionService() { stop(); }

std::unique_ptr<PredictionService> PredictionService::from_file(
    const std::filesystem::path& model_path, ServiceOptions options) {
  std::ifstream in(model_path, std::ios::binary);
  if (!in) throw NotFound("cannot open model file: " + model_path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto model = decode_model(bytes);
  return std::make_unique<PredictionService>(std::move(model),
                                             hex32(crc32_of(bytes.substr(0, bytes.size() - 4))),
                                             std::move(options));
}

HttpReply PredictionService::handle(std::string_view method, std::string_view path,
                                    std::string_view body) const {
  try {
    if (method == "GET" && path == "/healthz") return {200, "text/plain", "ok"};
    if (method == "GET" && path == "/v1/labels") {
      json out;
      out["labels"] = model_.labels.labels();
      return {200, "application/json", out.dump()};
    }
    if (method == "GET" && path == "/v1/model") {
      const auto d = model_.dims();
      json out;
      out["K"] = d.shared;
      out["T"] = d.word_private;
      out["S"] = d.label_private;
      out["V"] = d.words;
      out["L"] = d.labels;
      out["training_id"] = training_id_;
      out["seed"] = model_.seed;
      out["sweeps"] = model_.sweeps;
      out["label_scale"] = model_.label_scale;
      out["final_elbo"] = model_.elbo_trace.empty() ? 0.0 : model_.elbo_trace.back();
      return {200, "application/json", out.dump()};
    }
    if (method == "POST" && path == "/v1/predict") {
      auto reply = predict_endpoint(body);
      audit("predict", body, reply.status);
      return reply;
    }
    if (method == "POST" && path == "/v1/generate") {
      auto reply = generate_endpoint(body);
      audit("generate", body, reply.status);
      return reply;
    }
    return error_reply(404, "no route for " + std::string(method) + " " + std::string(path));
  } catch (const BadRequest& e) {
    return error_reply(400, e.message, e.field);
  }
}

HttpReply PredictionService::predict_endpoint(std::string_view body) const {
  const json request = parse_body(body);
  double bandwidth = options_.bandwidth;
  if (request.contains("bandwidth")) {
    const auto& b = request["bandwidth"];
    if (!b.is_number() || !(b.get<double>() > 0.0) || !std::isfinite(b.get<double>()))
      throw BadRequest{"must be a positive number", "bandwidth"};
    bandwidth = b.get<double>();
  }
  const auto points = parse_points(request);
  if (points.empty()) return error_reply(422, "drawing has no points", "points");
  const auto prediction = predict(points, model_, bandwidth);
  return {200, "application/json", prediction_json(prediction, model_, training_id_)};
}

HttpReply PredictionService::generate_endpoint(std::string_view body) const {
  const json request = parse_body(body);
  auto label = request.find("label");
  if (label == request.end() || !label->is_string()) throw BadRequest{"must be a string", "label"};
  std::size_t n_top = kDefaultTopLocations;
  if (request.contains("n_top")) {
    const auto& n = request["n_top"];
    if (!n.is_number_unsigned() || n.get<std::size_t>() == 0)
      throw BadRequest{"must be a positive integer", "n_top"};
    n_top = n.get<std::size_t>();
  }
  const std::string name = label->get<std::string>();
  if (!model_.labels.find(name)) return error_reply(404, "unknown label '" + name + "'", "label");
  const auto drawing = generate_drawing(name, model_, n_top);
  json out;
  out["label"] = drawing.label;
  out["locations"] = json::array();
  for (const auto& l : drawing.locations)
    out["locations"].push_back({{"view", std::string(to_string(l.view))},
                                {"x", l.x},
                                {"y", l.y},
                                {"weight", l.weight}});
  return {200, "application/json", out.dump()};
}

void PredictionService::audit(std::string_view endpoint, std::string_view body, int status) const {
  if (options_.audit_log.empty()) return;
  json entry;
  entry["endpoint"] = endpoint;
  entry["status"] = status;
  json parsed = json::parse(body, nullptr, false);
  entry["request"] = parsed.is_discarded() ? json(std::string(body)) : parsed;
  std::lock_guard lock(server_->audit_mutex);
  std::ofstream out(options_.audit_log, std::ios::app);
  out << entry.dump() << '\n';
}

int PredictionService::bind(const std::string& host, int port) {
  auto& http = server_->http;
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle(req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  http.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin}});
  http.Get("/healthz", forward);
  http.Get("/v1/labels", forward);
  http.Get("/v1/model", forward);
  http.Post("/v1/predict", forward);
  http.Post("/v1/generate", forward);
  http.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    const auto reply = error_reply(500, "internal error");
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  });
  if (!options_.static_dir.empty() && !http.set_mount_point("/", options_.static_dir.string()))
    throw NotFound("static asset directory not found: " + options_.static_dir.string());
  if (port == 0) return http.bind_to_any_port(host);
  return http.bind_to_port(host, port) ? port : -1;
}

void PredictionService::run() { server_->http.listen_after_bind(); }

void PredictionService::stop() {
  if (server_ && server_->http.is_running()) server_->http.stop();
}

}  // namespace ibtm
