#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "s2cr/curve.hpp"
#include "s2cr/dataset.hpp"

namespace s2cr {

/// Synthetic harmonization task. A smooth color field is cropped and flipped,
/// a rectangle or ellipse mask is drawn, and masked pixels are brightened by
/// the inverse of a random restoring curve:
///
///   composite = restore^{-1}(target),  restore(x) = psi_w(x - b)
///
/// where psi_w is a unit-mass curve with `corruption_levels` pieces and b is a
/// brightness offset on the 1/64 grid. The restoring map therefore lies in the
/// 64-level curve family the model predicts.
struct SynthConfig {
  std::uint64_t seed = 0;
  int image_size = 256;
  double fg_ratio_min = 0.02;
  double fg_ratio_max = 0.5;
  int corruption_levels = 16;
  /// Upper bound on the mass moved off p_0.
  double max_bend = 0.6;
  /// Upper bound on darkening depth + brightness offset; with base
  /// intensities capped at base_max the composite never clips.
  double max_shift = 0.2;
  int max_offset_steps = 4;  // b in {0, 1/64, ..., max_offset_steps/64}
  double base_min = 0.02;
  double base_max = 0.8;
  /// Draw a label per sample and let it select the brightness offset.
  bool semantic_labels = false;
  /// Force the identity corruption (composite == target).
  bool identity = false;

  void validate() const;
};

/// One channel's restoring map: psi_w(x - offset).
struct ChannelCorruption {
  ChannelCurve curve = ChannelCurve::identity(2);  // psi_w with corruption_levels pieces
  double offset = 0.0;

  /// Brightened value for a true intensity y, clamped to [0,1].
  double corrupt(double y) const;
  /// The restoring map as an L-level curve (L a multiple of the curve's levels
  /// and of 64/offset grid).
  ChannelCurve restoring_curve(int levels) const;
};

struct Corruption {
  std::array<ChannelCorruption, 3> channels;
  bool identity = false;
  std::optional<SemanticLabel> label;
};

/// Smooth random color field of the given size, intensities in
/// [base_min, base_max].
ImageBuffer procedural_base(int width, int height, const SynthConfig& config,
                            std::mt19937_64& rng);

Corruption sample_corruption(const SynthConfig& config, std::mt19937_64& rng);

MaskBuffer sample_mask(int size, const SynthConfig& config, std::mt19937_64& rng);

/// Crop/flip `base` to image_size, draw a mask and corrupt the masked pixels.
/// Deterministic in (base, config, rng state). Throws if base is too small.
TrainSample generate_sample(const ImageBuffer& base, const SynthConfig& config,
                            std::mt19937_64& rng, Corruption* drawn = nullptr);

/// Sample i is generated from a generator seeded with (config.seed, offset+i),
/// so train and validation splits use disjoint offsets.
class SyntheticDataset : public Dataset {
 public:
  SyntheticDataset(SynthConfig config, std::size_t count, std::uint64_t offset = 0);
  std::size_t size() const override { return count_; }
  TrainSample get(std::size_t index) const override;
  TrainSample get(std::size_t index, Corruption* drawn) const;
  const SynthConfig& config() const { return config_; }

 private:
  SynthConfig config_;
  std::size_t count_;
  std::uint64_t offset_;
};

/// Stateless 64-bit mixer used for per-sample seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Uniform double in [lo, hi) from the top 53 bits of one draw.
double uniform_real(std::mt19937_64& rng, double lo, double hi);

}  // namespace s2cr
