#include "s2cr/engine.hpp"

#include <httplib.h>

#include <chrono>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cmath>
#include <json.hpp>
#include <random>
#include <sstream>

#include "s2cr/error.hpp"
#include "s2cr/synth.hpp"

namespace s2cr {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RenderOptions render_options(int threads) {
  RenderOptions r;
  r.threads = std::max(1, threads);
  return r;
}

}  // namespace

HarmonizeResult harmonize(const HarmonizerModel& model, const ImageBuffer& composite,
                          const MaskBuffer& mask, std::optional<SemanticLabel> label,
                          std::optional<int> stage, int threads) {
  require_same_dims(composite, mask);
  const int stages = model.config.stages;
  const int last = stage.value_or(stages - 1);
  if (last < 0 || last >= stages) {
    fail(ErrorKind::kInvalidArgument, "stage must be in [0, " + std::to_string(stages - 1) + "]");
  }
  Prediction p = predict_curves(model, composite, mask, label);
  HarmonizeResult r;
  r.empty_mask = p.empty_mask;
  r.curves.assign(p.stage_params.begin(), p.stage_params.begin() + last + 1);
  if (p.empty_mask) {
    r.warning = "empty foreground mask; output equals input";
    r.output = composite;
    return r;
  }
  r.output = apply_curves(composite, mask, r.curves, threads);
  return r;
}

ImageBuffer apply_curves(const ImageBuffer& composite, const MaskBuffer& mask,
                         const std::vector<CurveParams>& stages, int threads) {
  require_same_dims(composite, mask);
  if (stages.empty()) fail(ErrorKind::kInvalidArgument, "no curves to apply");
  if (mask.empty_foreground()) return composite;
  auto images = render_stages(composite, mask, stages, render_options(threads));
  return std::move(images.back());
}

std::string BenchReport::to_json() const {
  return nlohmann::json{{"resolution", resolution},
                        {"iterations", iterations},
                        {"threads", threads},
                        {"wall_time_total", wall_time_total},
                        {"wall_time_render", wall_time_render},
                        {"wall_time_encode", wall_time_encode},
                        {"wall_time_thumbnail", wall_time_thumbnail},
                        {"megapixels_per_second", megapixels_per_second}}
      .dump();
}

BenchReport bench_resolution(const HarmonizerModel& model, int resolution, int iterations,
                             int threads, std::uint64_t seed) {
  if (resolution < 1 || iterations < 1) {
    fail(ErrorKind::kInvalidArgument, "bench needs a positive resolution and iteration count");
  }
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(resolution)));
  ImageBuffer composite(resolution, resolution);
  for (int c = 0; c < 3; ++c) {
    for (double& v : composite.mutable_plane(c)) v = uniform_real(rng, 0.0, 1.0);
  }
  MaskBuffer mask(resolution, resolution);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution / 2; ++x) mask.set(x, y, true);
  }
  std::optional<SemanticLabel> label;
  if (model.config.semantic) label = SemanticLabel::kOther;
  const RenderOptions ro = render_options(threads);

  // Warm-up.
  {
    const Prediction p = predict_curves(model, composite, mask, label);
    (void)render_stages(composite, mask, p.stage_params, ro);
  }
  BenchReport r;
  r.resolution = resolution;
  r.iterations = iterations;
  r.threads = ro.threads;
  for (int it = 0; it < iterations; ++it) {
    auto start = Clock::now();
    const Thumbnail thumb = make_thumbnail(model, composite, mask);
    r.wall_time_thumbnail += seconds_since(start);

    start = Clock::now();
    const Prediction p = predict_from_thumbnail(model, thumb, false, label);
    r.wall_time_encode += seconds_since(start);

    start = Clock::now();
    const auto images = render_stages(composite, mask, p.stage_params, ro);
    r.wall_time_render += seconds_since(start);

    start = Clock::now();
    const HarmonizeResult full = harmonize(model, composite, mask, label, std::nullopt, threads);
    r.wall_time_total += seconds_since(start);
  }
  r.wall_time_thumbnail /= iterations;
  r.wall_time_encode /= iterations;
  r.wall_time_render /= iterations;
  r.wall_time_total /= iterations;
  r.megapixels_per_second =
      static_cast<double>(resolution) * resolution / 1e6 / r.wall_time_total;
  return r;
}

std::vector<std::pair<double, double>> parse_pairs_csv(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    bool ok = comma != std::string::npos;
    double x = 0.0;
    double y = 0.0;
    if (ok) {
      try {
        std::size_t used = 0;
        x = std::stod(line.substr(0, comma), &used);
        const std::string rest = line.substr(comma + 1);
        y = std::stod(rest, &used);
        ok = rest.find_first_not_of(" \t", used) == std::string::npos;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (out.empty() && number == 1) continue;  // header
      fail(ErrorKind::kFormat, "pairs CSV line " + std::to_string(number) + ": expected x,y");
    }
    out.emplace_back(x, y);
  }
  return out;
}

std::string base64_encode(const std::string& bytes) {
  return httplib::detail::base64_encode(bytes);
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  constexpr int kLimit = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kLimit);
  mallopt(M_TRIM_THRESHOLD, kLimit);
#endif
}

}  // namespace s2cr
