#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "s2cr/curve_io.hpp"
#include "s2cr/engine.hpp"
#include "s2cr/error.hpp"
#include "s2cr/parallel.hpp"
#include "s2cr/png_io.hpp"
#include "s2cr/server.hpp"
#include "s2cr/synth.hpp"
#include "s2cr/training.hpp"

namespace {

using namespace s2cr;

constexpr int kExitBadArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitDimension = 5;

// Held-out synthetic samples start far past any training index.
constexpr std::uint64_t kEvalOffset = 1'000'000;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return kExitBadArgs;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kFormat:
    case ErrorKind::kNumeric:
      return kExitFormat;
    case ErrorKind::kDimension:
      return kExitDimension;
  }
  return 1;
}

std::optional<SemanticLabel> label_arg(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto label = parse_label(text);
  if (!label) fail(ErrorKind::kInvalidArgument, "unknown label '" + text + "'");
  return label;
}

int resolve_threads(int requested) { return requested > 0 ? requested : default_thread_count(); }

struct HarmonizeArgs {
  std::string input, mask, model, label, out, emit_curves;
  int stage = -1;
  int threads = 0;
};

int run_harmonize(const HarmonizeArgs& a) {
  const HarmonizerModel model = load_model(a.model);
  const ImageBuffer composite = load_png(a.input);
  const MaskBuffer mask = load_mask_png(a.mask);
  std::optional<int> stage;
  if (a.stage >= 0) stage = a.stage;
  const HarmonizeResult r =
      harmonize(model, composite, mask, label_arg(a.label), stage, resolve_threads(a.threads));
  if (!r.warning.empty()) std::cerr << "warning: " << r.warning << "\n";
  if (!a.out.empty()) save_png(r.output, a.out);
  if (!a.emit_curves.empty()) write_text_file(a.emit_curves, curve_stages_to_json(r.curves));
  return 0;
}

struct RenderArgs {
  std::string input, mask, curves, out;
  int threads = 0;
};

int run_render(const RenderArgs& a) {
  const std::vector<CurveParams> stages = read_curve_file(a.curves);
  const ImageBuffer composite = load_png(a.input);
  const MaskBuffer mask = load_mask_png(a.mask);
  if (mask.empty_foreground()) std::cerr << "warning: empty foreground mask; output equals input\n";
  save_png(apply_curves(composite, mask, stages, resolve_threads(a.threads)), a.out);
  return 0;
}

struct TrainArgs {
  std::string data, out, log;
  int synthetic = 0;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool semantic = false;
  int stages = 2;
  int levels = 64;
  int validation = 0;
  int threads = 0;
};

int run_train(const TrainArgs& a) {
  if (a.data.empty() == (a.synthetic <= 0)) {
    fail(ErrorKind::kInvalidArgument, "give exactly one of --data or --synthetic N");
  }
  EncoderConfig config;
  config.stages = a.stages;
  config.levels = a.levels;
  config.semantic = a.semantic;
  config.validate();

  std::unique_ptr<Dataset> data;
  std::unique_ptr<Dataset> validation;
  SynthConfig synth;
  synth.seed = a.seed;
  synth.semantic_labels = a.semantic;
  if (a.synthetic > 0) {
    data = std::make_unique<SyntheticDataset>(synth, a.synthetic);
  } else {
    data = std::make_unique<ManifestDataset>(a.data);
  }
  if (a.validation > 0) {
    validation = std::make_unique<SyntheticDataset>(synth, a.validation, kEvalOffset);
  }

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) fail(ErrorKind::kIo, "cannot open log " + a.log);
  }
  HarmonizerModel model = HarmonizerModel::initialize(config, a.seed);
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.seed = a.seed;
  opts.threads = resolve_threads(a.threads);
  opts.validation = validation.get();
  opts.on_epoch = [&](const EpochReport& r) {
    const std::string line = r.to_json();
    std::cerr << line << "\n";
    if (log) log << line << "\n" << std::flush;
  };
  train(model, *data, opts);
  save_model(model, a.out);
  return 0;
}

struct EvalArgs {
  std::string data, model;
  int synthetic = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_eval(const EvalArgs& a) {
  if (a.data.empty() == (a.synthetic <= 0)) {
    fail(ErrorKind::kInvalidArgument, "give exactly one of --data or --synthetic N");
  }
  const HarmonizerModel model = load_model(a.model);
  std::unique_ptr<Dataset> data;
  if (a.synthetic > 0) {
    SynthConfig synth;
    synth.seed = a.seed;
    synth.semantic_labels = model.config.semantic;
    data = std::make_unique<SyntheticDataset>(synth, a.synthetic, kEvalOffset);
  } else {
    data = std::make_unique<ManifestDataset>(a.data);
  }
  std::cout << evaluate(model, *data, resolve_threads(a.threads)).to_json() << "\n";
  return 0;
}

struct BenchArgs {
  std::string resolutions = "256,512,1024,2048";
  std::string model;
  int threads = 0;
  int iterations = 10;
};

int run_bench(const BenchArgs& a) {
  std::vector<int> sizes;
  std::stringstream ss(a.resolutions);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      sizes.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidArgument, "bad resolution '" + item + "'");
    }
    if (sizes.back() < 1) fail(ErrorKind::kInvalidArgument, "bad resolution '" + item + "'");
  }
  HarmonizerModel model;
  if (a.model.empty()) {
    model = HarmonizerModel::initialize(EncoderConfig{}, 0);
  } else {
    model = load_model(a.model);
  }
  for (int size : sizes) {
    std::cout << bench_resolution(model, size, a.iterations, resolve_threads(a.threads)).to_json()
              << "\n"
              << std::flush;
  }
  return 0;
}

struct FitArgs {
  std::string pairs, out;
  int levels = 64;
  bool allow_gaps = false;
};

int run_fit(const FitArgs& a) {
  const auto pairs = parse_pairs_csv(read_text_file(a.pairs));
  if (static_cast<int>(pairs.size()) < a.levels) {
    fail(ErrorKind::kInvalidArgument, "need at least " + std::to_string(a.levels) +
                                          " pairs, got " + std::to_string(pairs.size()));
  }
  FitOptions opts;
  opts.require_coverage = !a.allow_gaps;
  const CurveFit fit = fit_curve_to_mapping(pairs, a.levels, opts);
  const CurveParams params(fit.curve, fit.curve, fit.curve);
  write_text_file(a.out, curves_to_json(params));
  std::cout << nlohmann::json{{"mse", fit.mse}}.dump() << "\n";
  return 0;
}

struct ServeArgs {
  std::string model, ui_dir, host = "127.0.0.1";
  int port = 8080;
  int threads = 0;
};

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a) {
  ServerOptions opts;
  opts.host = a.host;
  opts.port = a.port;
  opts.threads = a.threads;
  if (!a.ui_dir.empty()) opts.ui_dir = a.ui_dir;
  ApiServer server(load_model(a.model), opts);
  const int port = server.bind();
  std::cout << "listening on http://" << a.host << ":" << port << "\n" << std::flush;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  retain_freed_memory();
  CLI::App app{"Curve-based image harmonization"};
  app.require_subcommand(1);

  HarmonizeArgs ha;
  auto* harm = app.add_subcommand("harmonize", "Harmonize a composite with a trained model");
  harm->add_option("--input", ha.input)->required();
  harm->add_option("--mask", ha.mask)->required();
  harm->add_option("--model", ha.model)->required();
  harm->add_option("--label", ha.label, "person|vehicle|animal|food|other");
  harm->add_option("--out", ha.out);
  harm->add_option("--emit-curves", ha.emit_curves);
  harm->add_option("--stage", ha.stage, "cascade stage to output (default: last)");
  harm->add_option("--threads", ha.threads);

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Apply a curve file to the masked region");
  render->add_option("--input", ra.input)->required();
  render->add_option("--mask", ra.mask)->required();
  render->add_option("--curves", ra.curves)->required();
  render->add_option("--out", ra.out)->required();
  render->add_option("--threads", ra.threads);

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--data", ta.data, "JSON-lines manifest");
  trn->add_option("--synthetic", ta.synthetic, "number of synthetic samples");
  trn->add_option("--epochs", ta.epochs);
  trn->add_option("--seed", ta.seed);
  trn->add_option("--out", ta.out)->required();
  trn->add_flag("--semantic", ta.semantic);
  trn->add_option("--stages", ta.stages);
  trn->add_option("--levels", ta.levels);
  trn->add_option("--log", ta.log, "JSON-lines epoch log");
  trn->add_option("--validation", ta.validation, "held-out synthetic samples per epoch");
  trn->add_option("--threads", ta.threads);

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Evaluate a model (fg-ratio buckets)");
  evl->add_option("--data", ea.data);
  evl->add_option("--synthetic", ea.synthetic);
  evl->add_option("--seed", ea.seed);
  evl->add_option("--model", ea.model)->required();
  evl->add_option("--threads", ea.threads);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time encode and render per resolution");
  bench->add_option("--resolutions", ba.resolutions);
  bench->add_option("--model", ba.model, "default: untrained default config");
  bench->add_option("--threads", ba.threads);
  bench->add_option("--iterations", ba.iterations)->check(CLI::Range(10, 100000));

  FitArgs fa;
  auto* fit = app.add_subcommand("fit-curve", "Least-squares curve through (x, y) pairs");
  fit->add_option("--pairs", fa.pairs)->required();
  fit->add_option("--levels", fa.levels);
  fit->add_option("--out", fa.out)->required();
  fit->add_flag("--allow-gaps", fa.allow_gaps, "skip the input coverage check");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--model", sa.model)->required();
  serve->add_option("--port", sa.port);
  serve->add_option("--host", sa.host);
  serve->add_option("--ui-dir", sa.ui_dir);
  serve->add_option("--threads", sa.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadArgs;
  }

  try {
    if (*harm) return run_harmonize(ha);
    if (*render) return run_render(ra);
    if (*trn) return run_train(ta);
    if (*evl) return run_eval(ea);
    if (*bench) return run_bench(ba);
    if (*fit) return run_fit(fa);
    if (*serve) return run_serve(sa);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitBadArgs;
}
