#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ibtm/corpus.hpp"
#include "ibtm/error.hpp"
#include "ibtm/featurize.hpp"
#include "ibtm/generate.hpp"
#include "ibtm/model_io.hpp"
#include "ibtm/predict.hpp"
#include "ibtm/sampler.hpp"
#include "ibtm/service.hpp"

#ifndef IBTM_DATA_DIR
#define IBTM_DATA_DIR "data"
#endif

namespace ibtm::cli {

namespace {

namespace fs = std::filesystem;

// Everything a command may need; filled from defaults, then the --config
// file, then command-line flags.
struct RunConfig {
  std::string corpus, maps, dictionary, singular, model, out, contour, label;
  std::string audit_log, static_dir, host = "127.0.0.1";
  std::uint64_t seed = 0;
  std::size_t k = 20, t = 5, s = 5;
  std::size_t vocab_size = kDefaultVocabSize;
  double bandwidth = kDefaultBandwidth;
  std::uint32_t scale = 10;
  int port = 8080;
  HyperParams hyper;
  std::size_t max_sweeps = 200;
  double elbo_tol = 1e-5;
  std::size_t threads = 1;
  std::string init = "jitter";
  std::size_t restarts = 1;
  std::size_t n_splits = 10, n_seeds = 10;
  std::string selection = "elbo";
  std::string predictor = "ibtm";
  std::size_t n_top = kDefaultTopLocations;
  std::size_t label_vocab = 20, docs = 500, words_per_doc = 60, labels_per_doc = 3;
  double peak_mass = 0.9;
};

// Exit with code 2 and a message.
struct UsageError {
  std::string message;
};

fs::path data_dir() {
  if (const char* env = std::getenv("IBTM_DATA_DIR"); env && *env) return env;
  return IBTM_DATA_DIR;
}

std::string or_default(const std::string& value, const char* file) {
  return value.empty() ? (data_dir() / file).string() : value;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError{std::string("missing required ") + flag};
  if (!fs::exists(path)) throw UsageError{std::string(flag) + " path does not exist: " + path};
}

ModelConfig model_config(const RunConfig& rc) {
  ModelConfig mc;
  mc.dims.shared = rc.k;
  mc.dims.word_private = rc.t;
  mc.dims.label_private = rc.s;
  mc.hyper = rc.hyper;
  mc.max_sweeps = rc.max_sweeps;
  mc.elbo_rel_tol = rc.elbo_tol;
  mc.seed = rc.seed;
  mc.threads = rc.threads;
  mc.init = rc.init == "word-topics" ? InitMethod::word_topics : InitMethod::jitter;
  mc.restarts = rc.restarts;
  return mc;
}

Corpus load_normalized_corpus(const RunConfig& rc) {
  require_file(rc.corpus, "--corpus");
  auto maps = LabelMaps::load(or_default(rc.maps, "exchangeable.tsv"),
                              or_default(rc.dictionary, "sv_en.tsv"),
                              or_default(rc.singular, "singular.tsv"));
  return normalize_corpus(read_corpus(rc.corpus), maps);
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const std::string model_path = rc.model.empty() ? rc.out : rc.model;
  if (model_path.empty()) throw UsageError{"missing required --model (output path)"};
  const Corpus corpus = load_normalized_corpus(rc);
  auto prepared = prepare_training(corpus, rc.vocab_size, rc.scale, rc.seed);
  out << "documents\t" << corpus.size() << "\twords\t" << prepared.locations.size() << "\tlabels\t"
      << prepared.labels.size() << '\n';
  char buf[96];
  auto model = fit_model(std::move(prepared), model_config(rc), rc.scale,
                         [&](std::size_t sweep, double value) {
                           std::snprintf(buf, sizeof buf, "sweep\t%zu\telbo\t%.10g\n", sweep, value);
                           out << buf << std::flush;
                         });
  const std::string bytes = encode_model(model);
  std::ofstream file(model_path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot write model file: " + model_path);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw Error("cannot write model file: " + model_path);
  out << "model\t" << model_path << "\tcrc32\t" << hex32(crc32_of(bytes.substr(0, bytes.size() - 4)))
      << '\n';
  return 0;
}

int cmd_predict(const RunConfig& rc, std::ostream& out) {
  require_file(rc.model, "--model");
  require_file(rc.corpus, "--corpus");
  const auto model = load_model(rc.model);
  const auto corpus = read_corpus(rc.corpus);
  char buf[64];
  for (const auto& doc : corpus.documents) {
    const auto p = predict(doc.points, model, rc.bandwidth);
    out << "doc\t" << doc.id << "\tbudget\t" << p.budget << "\tregions\t" << p.regions.n << '\n';
    for (std::size_t i = 0; i < p.ranked.size(); ++i) {
      std::snprintf(buf, sizeof buf, "\t%.6f", p.ranked[i].score);
      out << (i + 1) << '\t' << p.ranked[i].label << buf << '\n';
    }
  }
  return 0;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
  const Corpus corpus = load_normalized_corpus(rc);
  EvalProtocol protocol;
  protocol.n_splits = rc.n_splits;
  protocol.n_seeds = rc.n_seeds;
  protocol.seed = rc.seed;
  protocol.selection = rc.selection == "test-f" ? SeedSelection::best_test_f : SeedSelection::best_elbo;

  PredictorFactory factory;
  if (rc.predictor == "oracle") {
    factory = [] { return std::make_unique<OracleEchoPredictor>(); };
  } else if (rc.predictor == "random") {
    factory = [] { return std::make_unique<RandomPredictor>(kMinLabels); };
  } else {
    const auto mc = model_config(rc);
    factory = [&rc, mc] {
      return std::make_unique<IbtmPredictor>(mc, rc.vocab_size, rc.scale, rc.bandwidth);
    };
  }
  const auto report = evaluate(corpus, protocol, factory);
  write_report(report, out);
  if (!rc.out.empty()) {
    std::ofstream file(rc.out, std::ios::trunc);
    if (!file) throw Error("cannot write report: " + rc.out);
    write_report(report, file);
  }
  return 0;
}

int cmd_generate(const RunConfig& rc, std::ostream& out) {
  require_file(rc.model, "--model");
  if (rc.label.empty()) throw UsageError{"missing required --label"};
  const auto model = load_model(rc.model);
  const auto drawing = generate_drawing(rc.label, model, rc.n_top);
  char buf[128];
  for (std::size_t i = 0; i < drawing.locations.size(); ++i) {
    const auto& l = drawing.locations[i];
    std::snprintf(buf, sizeof buf, "%zu\t%s\t%.4f\t%.4f\t%.4f\n", i + 1,
                  std::string(to_string(l.view)).c_str(), l.x, l.y, l.weight);
    out << buf;
  }
  if (!rc.out.empty()) {
    const std::string contour_path = or_default(rc.contour, "body_contour.txt");
    require_file(contour_path, "--contour");
    const auto svg = render_heatmap(drawing, load_contour(contour_path));
    std::ofstream file(rc.out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write image: " + rc.out);
    file << svg;
    out << "svg\t" << rc.out << '\n';
  }
  return 0;
}

int cmd_synth(const RunConfig& rc, std::ostream& out) {
  if (rc.out.empty()) throw UsageError{"missing required --out"};
  ModelDims dims{rc.k, rc.t, rc.s, rc.vocab_size, rc.label_vocab};
  if (dims.shared < 1 || dims.words < 1 || dims.labels < 1)
    throw UsageError{"synth needs --k, --vocab-size and --label-vocab >= 1"};
  const auto topics = peaked_topics(dims, rc.peak_mass);
  const auto vocab = synthetic_location_vocab(dims);
  SyntheticCorpusOptions options;
  options.documents = rc.docs;
  options.words_per_doc = rc.words_per_doc;
  options.labels_per_doc = rc.labels_per_doc;
  std::mt19937_64 rng(rc.seed);
  const auto corpus = synthesize_corpus(topics, vocab, rc.hyper, options, rng);
  write_corpus(corpus, rc.out);
  out << "documents\t" << corpus.size() << "\tout\t" << rc.out << '\n';
  return 0;
}

int cmd_serve(const RunConfig& rc, std::ostream& out) {
  require_file(rc.model, "--model");
  ServiceOptions options;
  options.bandwidth = rc.bandwidth;
  options.audit_log = rc.audit_log;
  options.static_dir = rc.static_dir;
  auto service = PredictionService::from_file(rc.model, options);
  const int port = service->bind(rc.host, rc.port);
  if (port < 0) throw Error("cannot bind " + rc.host + ":" + std::to_string(rc.port));
  out << "listening\t" << rc.host << ':' << port << "\ttraining_id\t" << service->training_id()
      << std::endl;
  service->run();
  return 0;
}

void add_options(CLI::App& app, RunConfig& rc) {
  app.set_config("--config", "", "key=value configuration file; flags override it");
  app.add_option("--corpus", rc.corpus, "Corpus file (line-delimited records)");
  app.add_option("--maps", rc.maps, "Exchangeable label TSV");
  app.add_option("--dictionary", rc.dictionary, "Source-language dictionary TSV");
  app.add_option("--singular", rc.singular, "Plural-to-singular TSV used by bilateral splitting");
  app.add_option("--model", rc.model, "Model file");
  app.add_option("--out", rc.out, "Output path");
  app.add_option("--contour", rc.contour, "Body contour asset for SVG output");
  app.add_option("--label", rc.label, "Diagnostic label");
  app.add_option("--seed", rc.seed, "Random seed");
  app.add_option("--k", rc.k, "Shared topics")->check(CLI::PositiveNumber);
  app.add_option("--t", rc.t, "Private drawing topics");
  app.add_option("--s", rc.s, "Private label topics");
  app.add_option("--vocab-size", rc.vocab_size, "Location words")->check(CLI::PositiveNumber);
  app.add_option("--bandwidth", rc.bandwidth, "Mean-shift bandwidth")->check(CLI::PositiveNumber);
  app.add_option("--scale", rc.scale, "Label count scale factor")->check(CLI::PositiveNumber);
  app.add_option("--port", rc.port, "HTTP port")->envname("IBTM_PORT");
  app.add_option("--host", rc.host, "HTTP bind address");
  app.add_option("--audit-log", rc.audit_log, "Append request log (off by default)");
  app.add_option("--static-dir", rc.static_dir, "Static UI assets served under /");
  app.add_option("--alpha-shared", rc.hyper.alpha_shared)->check(CLI::PositiveNumber);
  app.add_option("--alpha-word-private", rc.hyper.alpha_word_private)->check(CLI::PositiveNumber);
  app.add_option("--alpha-label-private", rc.hyper.alpha_label_private)->check(CLI::PositiveNumber);
  app.add_option("--sigma-word-shared", rc.hyper.sigma_word_shared)->check(CLI::PositiveNumber);
  app.add_option("--sigma-word-private", rc.hyper.sigma_word_private)->check(CLI::PositiveNumber);
  app.add_option("--sigma-label-shared", rc.hyper.sigma_label_shared)->check(CLI::PositiveNumber);
  app.add_option("--sigma-label-private", rc.hyper.sigma_label_private)->check(CLI::PositiveNumber);
  app.add_option("--word-share-a", rc.hyper.word_share.a)->check(CLI::PositiveNumber);
  app.add_option("--word-share-b", rc.hyper.word_share.b)->check(CLI::PositiveNumber);
  app.add_option("--label-share-a", rc.hyper.label_share.a)->check(CLI::PositiveNumber);
  app.add_option("--label-share-b", rc.hyper.label_share.b)->check(CLI::PositiveNumber);
  app.add_option("--max-sweeps", rc.max_sweeps)->check(CLI::PositiveNumber);
  app.add_option("--elbo-tol", rc.elbo_tol, "Relative ELBO convergence tolerance");
  app.add_option("--threads", rc.threads, "E-step worker threads")->check(CLI::PositiveNumber);
  app.add_option("--init", rc.init, "Topic initialization")->check(CLI::IsMember({"jitter", "word-topics"}));
  app.add_option("--restarts", rc.restarts, "Training restarts; the best ELBO is kept")
      ->check(CLI::PositiveNumber);
  app.add_option("--n-splits", rc.n_splits)->check(CLI::PositiveNumber);
  app.add_option("--n-seeds", rc.n_seeds)->check(CLI::PositiveNumber);
  app.add_option("--selection", rc.selection, "Seed selection: elbo or test-f (optimistic)")
      ->check(CLI::IsMember({"elbo", "test-f"}));
  app.add_option("--predictor", rc.predictor, "Evaluation predictor")
      ->check(CLI::IsMember({"ibtm", "oracle", "random"}));
  app.add_option("--n-top", rc.n_top, "Locations in a generated drawing")->check(CLI::PositiveNumber);
  app.add_option("--label-vocab", rc.label_vocab, "Synthetic label vocabulary size");
  app.add_option("--docs", rc.docs, "Synthetic documents");
  app.add_option("--words-per-doc", rc.words_per_doc);
  app.add_option("--labels-per-doc", rc.labels_per_doc);
  app.add_option("--peak-mass", rc.peak_mass, "Synthetic topic concentration")
      ->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inter-battery topic model toolkit for discomfort drawings", "ibtm"};
  app.require_subcommand(1);
  RunConfig rc;
  add_options(app, rc);
  auto* train = app.add_subcommand("train", "Train a model from a labelled corpus")->fallthrough();
  auto* predict = app.add_subcommand("predict", "Rank labels for each drawing in a corpus")->fallthrough();
  auto* evaluate = app.add_subcommand("evaluate", "Repeated random-split F-measure evaluation")->fallthrough();
  auto* generate = app.add_subcommand("generate", "Typical drawing for a label")->fallthrough();
  auto* synth = app.add_subcommand("synth", "Sample a synthetic corpus")->fallthrough();
  auto* serve = app.add_subcommand("serve", "HTTP prediction service")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(rc, out);
    if (predict->parsed()) return cmd_predict(rc, out);
    if (evaluate->parsed()) return cmd_evaluate(rc, out);
    if (generate->parsed()) return cmd_generate(rc, out);
    if (synth->parsed()) return cmd_synth(rc, out);
    if (serve->parsed()) return cmd_serve(rc, out);
  } catch (const UsageError& e) {
    err << "error: " << e.message << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace ibtm::cli
