// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// (e.g. "A1 A3") to run a subset. Exit status is nonzero if any check fails.

#include <httplib.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "s2cr/curve_io.hpp"
#include "s2cr/engine.hpp"
#include "s2cr/parallel.hpp"
#include "s2cr/png_io.hpp"
#include "s2cr/server.hpp"
#include "s2cr/synth.hpp"
#include "s2cr/training.hpp"

namespace {

using namespace s2cr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ChannelCurve random_curve(std::mt19937_64& rng, int levels, double floor = 0.0) {
  std::vector<double> p(levels);
  for (double& v : p) {
    v = floor > 0.0 ? uniform(rng, floor, 1.0) : (uniform(rng, 0, 1) < 0.2 ? 0.0 : uniform(rng, 0, 1));
  }
  p[0] += 1e-3;
  return ChannelCurve(std::move(p));
}

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// ---------------------------------------------------------------------------

void curve_math(Outcome& o) {
  std::mt19937_64 rng(101);
  constexpr int kCases = 100000;
  double worst_scale = 0.0;
  int violations = 0;
  for (int i = 0; i < kCases; ++i) {
    const int levels = 2 + static_cast<int>(rng() % 127);
    const ChannelCurve c = random_curve(rng, levels);
    double x1 = uniform(rng, 0.0, 1.0);
    double x2 = uniform(rng, 0.0, 1.0);
    if (x1 > x2) std::swap(x1, x2);
    const double y1 = render_intensity(x1, c);
    const double y2 = render_intensity(x2, c);
    std::vector<double> scaled(c.weights().begin(), c.weights().end());
    const double k = std::exp(uniform(rng, -5.0, 5.0));
    for (double& v : scaled) v *= k;
    const double ys = render_intensity(x1, ChannelCurve(scaled));
    worst_scale = std::max(worst_scale, std::abs(ys - y1));
    if (render_intensity(0.0, c) != 0.0 || y1 > y2 || y1 < 0.0 || y2 > 1.0) ++violations;
  }
  const double hand = render_intensity(0.5, ChannelCurve({1, 1, 1, 1}));
  double identity_dev = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double x = k / 1000.0;
    identity_dev = std::max(identity_dev, std::abs(render_intensity(x, ChannelCurve::identity(64)) - x));
  }
  o.require(violations == 0, "psi(0)=0 / monotone / range");
  o.require(worst_scale <= 1e-12, "scale invariance");
  o.require(std::abs(hand - 0.1875) <= 1e-12, "L=4 uniform psi(0.5)=0.1875");
  o.require(identity_dev <= 1e-12, "identity curve");
  o.detail << kCases << " cases, " << violations << " violations, max scale dev " << worst_scale
           << ", psi(0.5)=" << hand << ", identity dev " << identity_dev;
}

// Tiny-config end-to-end gradient check against central differences.
int model_gradient_failures(bool semantic, int stages, std::uint64_t seed, int* checked) {
  EncoderConfig cfg;
  cfg.thumbnail_size = 16;
  cfg.block_channels = {4, 8};
  cfg.feature_dim = 8;
  cfg.levels = 8;
  cfg.stages = stages;
  cfg.semantic = semantic;
  HarmonizerModel m = HarmonizerModel::initialize(cfg, seed);
  std::mt19937_64 rng(seed);
  for (auto& h : m.heads) {
    for (Linear* l : {&h.fore, &h.back}) {
      for (double& w : l->weight) w = uniform(rng, -0.05, 0.05);
      for (double& b : l->bias) b = uniform(rng, 0.2, 0.6);
    }
  }
  for (auto& layer : m.encoder) {
    for (double& b : layer.bias) b = uniform(rng, 0.0, 0.1);
  }
  TrainSample s;
  s.composite = ImageBuffer(32, 32);
  for (int c = 0; c < 3; ++c) {
    for (double& v : s.composite.mutable_plane(c)) v = uniform(rng, 0.05, 0.7);
  }
  s.mask = MaskBuffer(32, 32);
  for (int y = 6; y < 26; ++y) {
    for (int x = 4; x < 20; ++x) s.mask.set(x, y, true);
  }
  // Brightened target: curve outputs never exceed their inputs, so the L1
  // sign is fixed and the loss is differentiable in every parameter.
  s.target = s.composite;
  for (int c = 0; c < 3; ++c) {
    auto t = s.target.mutable_plane(c);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (s.mask.values()[i]) t[i] += 0.25;
    }
  }
  if (semantic) s.label = SemanticLabel::kVehicle;

  const GradientResult g = backward(m, s);
  const auto grads = g.grad.parameters();
  auto params = m.parameters();
  int failures = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].values.size(); ++i) {
      double& w = params[t].values[i];
      const double saved = w;
      w = saved + 1e-5;
      const double up = training_loss(m, s);
      w = saved - 1e-5;
      const double down = training_loss(m, s);
      w = saved;
      const double fd = (up - down) / 2e-5;
      if (rel_err(grads[t].values[i], fd, 1e-4) > 1e-3) ++failures;
      ++*checked;
    }
  }
  return failures;
}

void gradients(Outcome& o) {
  std::mt19937_64 rng(202);
  double worst_x = 0.0;
  double worst_p = 0.0;
  int cases = 0;
  while (cases < 1000) {
    const int levels = 2 + static_cast<int>(rng() % 63);
    const ChannelCurve c = random_curve(rng, levels, 0.01);
    const double x = uniform(rng, 2e-4, 1.0 - 2e-4);
    const double t = x * levels;
    if (std::abs(t - std::round(t)) / levels < 1e-4) continue;
    const double h = 1e-5;
    const double fd = (render_intensity(x + h, c) - render_intensity(x - h, c)) / (2 * h);
    worst_x = std::max(worst_x, rel_err(grad_wrt_input(x, c), fd, 1e-8));
    const auto g = grad_wrt_params(x, c);
    std::vector<double> p(c.weights().begin(), c.weights().end());
    for (int i = 0; i < levels; ++i) {
      auto up = p;
      auto dn = p;
      up[i] += h;
      dn[i] -= h;
      const double fdp =
          (render_intensity(x, ChannelCurve(up)) - render_intensity(x, ChannelCurve(dn))) / (2 * h);
      worst_p = std::max(worst_p, rel_err(g[i], fdp, 1e-8));
    }
    ++cases;
  }
  int checked = 0;
  const int failures = model_gradient_failures(false, 1, 7, &checked) +
                       model_gradient_failures(true, 2, 8, &checked);
  o.require(worst_x <= 1e-4, "d psi / dx");
  o.require(worst_p <= 1e-4, "d psi / dp");
  o.require(failures == 0, "model gradient check");
  o.detail << cases << " cases, max rel err dx " << worst_x << ", dp " << worst_p
           << "; model check " << checked - failures << "/" << checked << " params within 1e-3";
}

void oracle_inversion(Outcome& o) {
  const SyntheticDataset data(SynthConfig{.seed = 303}, 50);
  double worst = 0.0;
  double mean_before = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TrainSample s = data.get(i);
    std::vector<ChannelCurve> fitted;
    for (int c = 0; c < 3; ++c) {
      std::vector<std::pair<double, double>> pairs;
      for (std::size_t k = 0; k < s.composite.pixel_count(); ++k) {
        if (s.mask.values()[k]) pairs.emplace_back(s.composite.plane(c)[k], s.target.plane(c)[k]);
      }
      FitOptions opts;
      opts.require_coverage = false;  // pixels cover only part of [0,1]
      fitted.push_back(fit_curve_to_mapping(pairs, 64, opts).curve);
    }
    const ImageBuffer restored =
        render_region(s.composite, s.mask, CurveParams(fitted[0], fitted[1], fitted[2]));
    worst = std::max(worst, foreground_mse(restored, s.target, s.mask));
    mean_before += foreground_mse(s.composite, s.target, s.mask) / data.size();
  }
  o.require(worst < 1.0, "fMSE < 1.0 on every sample");
  o.detail << "50 samples, corrupted mean fMSE " << mean_before << ", worst restored fMSE "
           << worst;
}

void resolution_invariance(Outcome& o) {
  std::mt19937_64 rng(404);
  ImageBuffer low(128, 96);
  for (int c = 0; c < 3; ++c) {
    for (double& v : low.mutable_plane(c)) v = uniform(rng, 0.0, 1.0);
  }
  MaskBuffer mask(128, 96);
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 128; ++x) mask.set(x, y, uniform(rng, 0, 1) < 0.4);
  }
  const CurveParams p(random_curve(rng, 64), random_curve(rng, 64), random_curve(rng, 64));
  const ImageBuffer a = render_region(upscale_nearest(low, 8), upscale_nearest(mask, 8), p);
  const ImageBuffer b = upscale_nearest(render_region(low, mask, p), 8);
  o.require(a == b, "render at 8x equals 8x of render");

  // Full-resolution detail that averages out inside every thumbnail cell.
  const HarmonizerModel model = HarmonizerModel::initialize(EncoderConfig{}, 404);
  ImageBuffer x(1024, 1024);
  for (int c = 0; c < 3; ++c) {
    for (double& v : x.mutable_plane(c)) v = static_cast<double>(64 + rng() % 128) / 256.0;
  }
  ImageBuffer y = x;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 1024; ++r) {
      for (int q = 0; q < 1024; ++q) y.at(c, q, r) += ((q + r) % 2 == 0 ? 1.0 : -1.0) / 64.0;
    }
  }
  MaskBuffer m(1024, 1024);
  for (int r = 200; r < 700; ++r) {
    for (int q = 300; q < 800; ++q) m.set(q, r, true);
  }
  const bool same_thumb = thumbnail_of(x, 256) == thumbnail_of(y, 256);
  const bool same_params =
      predict_curves(model, x, m).stage_params == predict_curves(model, y, m).stage_params;
  o.require(same_thumb && !(x == y), "test inputs differ only below the thumbnail");
  o.require(same_params, "curve parameters identical");
  o.detail << "1024x768 render bit-exact: " << (a == b ? "yes" : "no")
           << "; thumbnail-identical inputs give identical params: " << (same_params ? "yes" : "no");
}

void training_target(Outcome& o) {
  SynthConfig synth;
  synth.seed = 505;
  const SyntheticDataset train_set(synth, 2000);
  const SyntheticDataset held_out(synth, 200, 1'000'000);
  HarmonizerModel model = HarmonizerModel::initialize(EncoderConfig{}, 505);
  TrainOptions opts;
  opts.epochs = 10;
  opts.seed = 505;
  opts.threads = default_thread_count();
  opts.on_epoch = [](const EpochReport& r) {
    std::cerr << "  A5 epoch " << r.epoch << " loss " << r.loss << "\n";
  };
  const auto start = Clock::now();
  train(model, train_set, opts);
  const double minutes = std::chrono::duration<double>(Clock::now() - start).count() / 60.0;
  const EvalReport r = evaluate(model, held_out, opts.threads);
  const double base = r.buckets[3].baseline.fmse;
  const double ours = r.buckets[3].model.fmse;
  const double reduction = 1.0 - ours / base;
  int refined = 0;
  double stage0 = 0.0;
  double stage1 = 0.0;
  for (const auto& s : r.samples) {
    if (s.stage_fmse[1] <= s.stage_fmse[0]) ++refined;
    stage0 += s.stage_fmse[0] / r.samples.size();
    stage1 += s.stage_fmse[1] / r.samples.size();
  }
  const double refined_share = static_cast<double>(refined) / r.samples.size();
  o.require(reduction >= 0.60, "fMSE reduction >= 60%");
  o.require(refined_share >= 0.70, "stage 1 <= stage 0 on >= 70%");
  o.detail << "held-out fMSE " << base << " -> " << ours << " (" << 100 * reduction
           << "% reduction), stage-1 <= stage-0 on " << 100 * refined_share
           << "% (mean stage fMSE " << stage0 << " -> " << stage1 << "), training "
           << minutes << " min";
}

void throughput(Outcome& o) {
  retain_freed_memory();
  const HarmonizerModel model = HarmonizerModel::initialize(EncoderConfig{}, 606);
  std::vector<BenchReport> single;
  for (int res : {256, 512, 1024, 2048}) single.push_back(bench_resolution(model, res, 10, 1));
  const BenchReport parallel = bench_resolution(model, 2048, 10, default_thread_count());
  double enc_min = INFINITY;
  double enc_max = 0.0;
  for (const auto& b : single) {
    enc_min = std::min(enc_min, b.wall_time_encode);
    enc_max = std::max(enc_max, b.wall_time_encode);
  }
  const double variation = enc_max / enc_min - 1.0;
  const double render_ratio = single[3].wall_time_render / single[0].wall_time_render;
  o.require(single[3].wall_time_total <= 2.6, "2048^2 single context <= 2.6 s");
  o.require(parallel.wall_time_total <= 0.5, "2048^2 default parallelism <= 0.5 s");
  o.require(variation < 0.20, "encode variation < 20%");
  o.require(render_ratio >= 32.0 && render_ratio <= 96.0, "render scaling 64x +- 50%");
  o.detail << "2048^2 total " << single[3].wall_time_total << " s (1 thread), "
           << parallel.wall_time_total << " s (" << parallel.threads
           << " threads); encode variation " << 100 * variation << "%; render 2048^2/256^2 = "
           << render_ratio << "x";
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(S2CR_CLI_PATH) + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void format_round_trips(Outcome& o) {
  std::mt19937_64 rng(707);
  const CurveParams p(random_curve(rng, 64), random_curve(rng, 64), random_curve(rng, 64));
  const std::string cj = curve_stages_to_json({p, CurveParams::identity(64)});
  const bool curve_ok = curve_stages_to_json(curve_stages_from_json(cj)) == cj &&
                        curves_to_json(curves_from_json(curves_to_json(p))) == curves_to_json(p);
  EncoderConfig sem;
  sem.semantic = true;
  const std::string mb = serialize(HarmonizerModel::initialize(sem, 707));
  const bool model_ok = serialize(deserialize(mb)) == mb;

  double worst_ratio = 0.0;
  double worst_knot = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelCurve c = random_curve(rng, 64);
    const Lut lut = build_lut(c, kDefaultLutResolution);
    double max_slope = 0.0;
    double cumulative = 0.0;
    for (double w : c.weights()) max_slope = std::max(max_slope, (cumulative += w) / c.mass());
    const double bound = max_slope / (2.0 * kDefaultLutResolution);
    for (int i = 0; i < 5000; ++i) {
      const double x = uniform(rng, 0.0, 1.0);
      worst_ratio = std::max(worst_ratio, std::abs(lut.apply(x) - render_intensity(x, c)) / bound);
    }
    for (int k = 0; k <= 64; ++k) {
      const double x = k / 64.0;
      worst_knot = std::max(worst_knot, std::abs(lut.apply(x) - render_intensity(x, c)));
    }
  }

  // CLI and HTTP render paths.
  const fs::path dir = fs::temp_directory_path() / "s2cr_acceptance_a7";
  fs::create_directories(dir);
  ImageBuffer img(300, 200);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.mutable_plane(c)) v = static_cast<double>(rng() % 256) / 255.0;
  }
  MaskBuffer mask(300, 200);
  for (int y = 40; y < 160; ++y) {
    for (int x = 50; x < 220; ++x) mask.set(x, y, true);
  }
  save_png(img, dir / "in.png");
  save_mask_png(mask, dir / "mask.png");
  write_text_file(dir / "curves.json", cj);
  const int code = run_cli("render --input " + (dir / "in.png").string() + " --mask " +
                           (dir / "mask.png").string() + " --curves " +
                           (dir / "curves.json").string() + " --out " + (dir / "cli.png").string());
  ServerOptions so;
  so.port = 0;
  ApiServer server(HarmonizerModel::initialize(EncoderConfig{}, 1), so);
  const int port = server.bind();
  std::thread t([&] { server.serve(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/api/render",
                         httplib::MultipartFormDataItems{
                             {"composite", read_text_file(dir / "in.png"), "in.png", "image/png"},
                             {"mask", read_text_file(dir / "mask.png"), "mask.png", "image/png"},
                             {"curves", cj, "curves.json", "application/json"}});
  server.stop();
  t.join();
  const bool http_ok = code == 0 && res && res->status == 200 &&
                       res->body == read_text_file(dir / "cli.png");
  fs::remove_all(dir);

  o.require(curve_ok, "curve JSON byte-identical");
  o.require(model_ok, "model file byte-identical");
  o.require(worst_ratio <= 1.0, "LUT within interpolation bound");
  o.require(worst_knot <= 1e-12, "LUT exact at knots");
  o.require(http_ok, "CLI and HTTP render byte-identical");
  o.detail << "curve JSON " << (curve_ok ? "ok" : "mismatch") << ", model file "
           << (model_ok ? "ok" : "mismatch") << ", LUT error/bound " << worst_ratio
           << ", knot error " << worst_knot << ", CLI vs HTTP "
           << (http_ok ? "identical" : "different");
}

void loss_semantics(Outcome& o) {
  ImageBuffer target(4, 4, 0.0);
  ImageBuffer stage = target;
  MaskBuffer mask(4, 4);
  mask.set(2, 1, true);
  stage.at(0, 2, 1) = 0.3;
  const double loss = relative_l1(std::vector<ImageBuffer>{stage}, target, mask);

  std::mt19937_64 rng(808);
  ImageBuffer stage2 = stage;
  ImageBuffer target2 = target;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        if (mask.at(x, y)) continue;
        stage2.at(c, x, y) = uniform(rng, 0, 1);
        target2.at(c, x, y) = uniform(rng, 0, 1);
      }
    }
  }
  const double perturbed = relative_l1(std::vector<ImageBuffer>{stage2}, target2, mask);
  const double psnr = metrics(ImageBuffer(8, 8, 0.3), ImageBuffer(8, 8, 0.4), MaskBuffer(8, 8, 1)).psnr;
  o.require(loss == 0.3, "relative L1 hand example");
  o.require(perturbed == loss, "background invariance");
  o.require(std::abs(psnr - 20.0) <= 1e-9, "PSNR 20 dB");
  o.detail << "loss " << loss << ", with background perturbed " << perturbed << ", PSNR " << psnr;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    std::string id;
    std::string name;
    std::function<void(Outcome&)> run;
    double time_limit;  // seconds; 0 = none
  };
  const std::vector<Criterion> criteria = {
      {"A1", "curve math exactness", curve_math, 5.0},
      {"A2", "gradient correctness", gradients, 60.0},
      {"A3", "oracle curve inversion", oracle_inversion, 60.0},
      {"A4", "resolution invariance", resolution_invariance, 30.0},
      {"A5", "synthetic training target", training_target, 1800.0},
      {"A6", "throughput", throughput, 0.0},
      {"A7", "format round-trips", format_round_trips, 0.0},
      {"A8", "loss semantics", loss_semantics, 0.0},
  };
  const std::set<std::string> selected(argv + 1, argv + argc);
  bool all = true;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    const auto start = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.time_limit > 0.0) o.require(secs < c.time_limit, "runtime limit");
    all = all && o.pass;
    std::cout << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
              << o.detail.str() << " (" << secs << " s)" << std::endl;
  }
  return all ? 0 : 1;
}
