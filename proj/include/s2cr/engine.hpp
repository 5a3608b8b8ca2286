#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "s2cr/curve.hpp"
#include "s2cr/image.hpp"
#include "s2cr/model.hpp"

namespace s2cr {

// Rendering entry points shared by the CLI and the HTTP API, so both produce
// bit-identical output for identical inputs.

struct HarmonizeResult {
  ImageBuffer output;
  /// Curves of stages 0..selected; rendering them in order reproduces output.
  std::vector<CurveParams> curves;
  bool empty_mask = false;
  std::string warning;
};

/// Predicts curves and renders up to `stage` (default: the last stage).
/// Throws Error(kInvalidArgument) for an out-of-range stage or a missing label
/// on a semantic model; Error(kDimension) on size mismatch.
HarmonizeResult harmonize(const HarmonizerModel& model, const ImageBuffer& composite,
                          const MaskBuffer& mask, std::optional<SemanticLabel> label,
                          std::optional<int> stage, int threads);

/// Applies stage curves in order; an empty mask returns the input unchanged.
ImageBuffer apply_curves(const ImageBuffer& composite, const MaskBuffer& mask,
                         const std::vector<CurveParams>& stages, int threads);

struct BenchReport {
  int resolution = 0;
  int iterations = 0;
  int threads = 1;
  double wall_time_total = 0.0;   // seconds, full pipeline
  double wall_time_render = 0.0;  // seconds, all stages at full resolution
  double wall_time_encode = 0.0;     // seconds, encoder + heads on the thumbnail
  double wall_time_thumbnail = 0.0;  // seconds, full-resolution resize to the thumbnail
  double megapixels_per_second = 0.0;

  std::string to_json() const;
};

/// Random composite with the left half masked, timed over `iterations` runs
/// after one warm-up. Reported times are means; total covers the whole
/// pipeline (resize, encode, render) in one call.
BenchReport bench_resolution(const HarmonizerModel& model, int resolution, int iterations,
                             int threads, std::uint64_t seed = 1);

/// "x,y" rows; a non-numeric first row is treated as a header. Throws
/// Error(kFormat) naming the line for malformed rows.
std::vector<std::pair<double, double>> parse_pairs_csv(const std::string& text);

std::string base64_encode(const std::string& bytes);

/// Keeps freed image-sized blocks in the heap instead of returning them to the
/// OS, so repeated full-resolution passes do not pay page faults each time.
/// No-op outside glibc.
void retain_freed_memory();

}  // namespace s2cr
