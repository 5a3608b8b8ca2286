#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2cr/curve.hpp"
#include "s2cr/image.hpp"

namespace s2cr {

enum class SemanticLabel { kPerson = 0, kVehicle = 1, kAnimal = 2, kFood = 3, kOther = 4 };
inline constexpr int kSemanticClassCount = 5;

/// Accepts person/vehicle/animal/food/other, case-insensitive.
std::optional<SemanticLabel> parse_label(std::string_view text);
std::string_view label_name(SemanticLabel label);

struct EncoderConfig {
  int thumbnail_size = 256;
  std::vector<int> block_channels = {16, 32, 64, 128};
  int feature_dim = 128;
  int levels = 64;
  int stages = 2;
  bool semantic = false;
  int semantic_classes = kSemanticClassCount;
  int semantic_embed_dim = 16;

  /// Throws Error(kInvalidArgument) on an inconsistent configuration.
  void validate() const;
  /// Width of each head's input: feature_dim (+ semantic_embed_dim).
  int head_input_dim() const { return feature_dim + (semantic ? semantic_embed_dim : 0); }

  bool operator==(const EncoderConfig&) const = default;
};

/// Dense layer, weight stored row-major as [out, in].
struct Linear {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// 3x3 stride-2 convolution with padding 1, weight stored as [out, in, 3, 3].
struct ConvLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Foreground and background projections for one cascade stage.
struct StageHeads {
  Linear fore;
  Linear back;
};

struct ParamView {
  std::string name;
  std::vector<int> shape;
  std::span<double> values;
};

struct ConstParamView {
  std::string name;
  std::vector<int> shape;
  std::span<const double> values;
};

/// Shared thumbnail encoder, semantic embedding and per-stage projection heads.
///
/// The same structure doubles as a gradient accumulator (see zeros_like).
struct HarmonizerModel {
  EncoderConfig config;
  std::vector<ConvLayer> encoder;
  Linear semantic_hidden;  // one-hot -> embed, rectified
  Linear semantic_out;     // embed -> embed
  std::vector<StageHeads> heads;

  /// Fresh weights: fan-in scaled encoder, near-identity heads.
  static HarmonizerModel initialize(const EncoderConfig& config, std::uint64_t seed);
  /// Same shapes, every value zero.
  static HarmonizerModel zeros_like(const HarmonizerModel& model);

  /// Every trainable tensor in a fixed order (the serialization order).
  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;
  std::size_t parameter_count() const;
};

using FeatureVector = std::vector<double>;

/// Shared encoder + global average pooling. The region must be
/// thumbnail_size x thumbnail_size.
FeatureVector encode(const HarmonizerModel& model, const ImageBuffer& region);

/// Two-layer perceptron over the one-hot label.
std::vector<double> semantic_embedding(const HarmonizerModel& model, SemanticLabel label);

/// Curve parameters for one stage: rectified sum of both projections plus a
/// 1e-6 floor on p_0 of every channel.
CurveParams predict_params(const HarmonizerModel& model, const FeatureVector& f_fore,
                           const FeatureVector& f_back, int stage,
                           std::optional<SemanticLabel> label = std::nullopt);

/// Converts a raw 3L head output (already rectified) into curves.
CurveParams curves_from_head_output(std::span<const double> rectified, int levels);

/// Floor added to p_0 of each predicted channel.
inline constexpr double kPieceFloor = 1e-6;

struct ThumbnailFeatures {
  FeatureVector fore;
  FeatureVector back;
};

/// Thumbnail, region split and the two encoder passes.
ThumbnailFeatures extract_features(const HarmonizerModel& model, const ImageBuffer& composite,
                                   const MaskBuffer& mask);

struct Prediction {
  std::vector<CurveParams> stage_params;
  bool empty_mask = false;
};

/// Fixed-size encoder input: the only resolution-dependent step of prediction.
struct Thumbnail {
  ImageBuffer image;
  MaskBuffer mask;
};

Thumbnail make_thumbnail(const HarmonizerModel& model, const ImageBuffer& composite,
                         const MaskBuffer& mask);

/// Encoder and heads on a prepared thumbnail. `empty_mask` refers to the
/// full-resolution mask, which decides the identity fallback.
Prediction predict_from_thumbnail(const HarmonizerModel& model, const Thumbnail& thumb,
                                  bool empty_mask,
                                  std::optional<SemanticLabel> label = std::nullopt);

/// Curve parameters for every stage (no rendering).
Prediction predict_curves(const HarmonizerModel& model, const ImageBuffer& composite,
                          const MaskBuffer& mask,
                          std::optional<SemanticLabel> label = std::nullopt);

struct ForwardResult {
  std::vector<CurveParams> stage_params;
  std::vector<ImageBuffer> stage_images;
  bool empty_mask = false;
  std::string warning;
};

/// Full cascade: stage 0 renders the composite, stage k renders stage k-1's
/// output. An empty mask yields identity curves and unchanged images.
ForwardResult forward(const HarmonizerModel& model, const ImageBuffer& composite,
                      const MaskBuffer& mask, std::optional<SemanticLabel> label = std::nullopt,
                      const RenderOptions& render = {});

/// Renders precomputed stage curves in order; shared by the CLI render path,
/// the HTTP API and forward().
std::vector<ImageBuffer> render_stages(const ImageBuffer& composite, const MaskBuffer& mask,
                                       const std::vector<CurveParams>& stages,
                                       const RenderOptions& render = {});

// Model file (.s2cr): "S2CR", u32 little-endian header length, JSON header
// {version, config, tensors: [{name, shape}]}, then little-endian float32 data
// in manifest order.
inline constexpr int kModelFormatVersion = 1;

std::string serialize(const HarmonizerModel& model);
HarmonizerModel deserialize(std::string_view bytes);
void save_model(const HarmonizerModel& model, const std::filesystem::path& path);
HarmonizerModel load_model(const std::filesystem::path& path);

}  // namespace s2cr
