#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "s2cr/dataset.hpp"
#include "s2cr/image.hpp"
#include "s2cr/model.hpp"

namespace s2cr {

/// Sum over stages of the masked L1 error (all three channels) divided by the
/// foreground pixel count. Zero for an empty mask.
double relative_l1(std::span<const ImageBuffer> stage_images, const ImageBuffer& target,
                   const MaskBuffer& mask);

/// Differences smaller than this count as zero in the L1 subgradient.
inline constexpr double kL1DeadZone = 1e-12;

/// d relative_l1 / d stage image for one stage, as three planes.
std::array<std::vector<double>, 3> relative_l1_grad(const ImageBuffer& stage,
                                                    const ImageBuffer& target,
                                                    const MaskBuffer& mask);

/// Loss of the training forward pass (direct curve evaluation, no LUT).
double training_loss(const HarmonizerModel& model, const TrainSample& sample);

struct GradientResult {
  double loss = 0.0;
  HarmonizerModel grad;  // same shapes as the model
  std::vector<double> stage_loss;
};

/// Reverse-mode gradient of training_loss w.r.t. every parameter. Throws
/// Error(kNumeric) naming the parameter if any gradient is non-finite.
GradientResult backward(const HarmonizerModel& model, const TrainSample& sample);

struct AdamWConfig {
  double lr = 2e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamWConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;
};

/// Decoupled weight decay then the bias-corrected Adam update:
///   w <- w * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are allocated on first use. Throws Error(kDimension) on shape
/// mismatch.
void adamw_step(OptimizerState& state, std::span<const ParamView> params,
                std::span<const ConstParamView> grads);
void adamw_step(OptimizerState& state, HarmonizerModel& model, const HarmonizerModel& grad);

struct EpochReport {
  int epoch = 0;
  double loss = 0.0;
  double val_mse = 0.0;
  double val_fmse = 0.0;
  double val_psnr = 0.0;
  bool has_validation = false;

  /// {"epoch", "loss", "val_mse", "val_fmse", "val_psnr"}
  std::string to_json() const;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int threads = 1;
  AdamWConfig optimizer;
  const Dataset* validation = nullptr;
  std::function<void(const EpochReport&)> on_epoch;
};

/// Seeded shuffled mini-batches, batch-mean gradients, one AdamW step per
/// batch. Per-sample gradients may be computed concurrently but are reduced in
/// sample order, so the result does not depend on the thread count.
std::vector<EpochReport> train(HarmonizerModel& model, const Dataset& dataset,
                               const TrainOptions& options);

struct SampleEvaluation {
  double fg_ratio = 0.0;
  MetricReport model;
  MetricReport baseline;
  std::vector<double> stage_fmse;
};

struct BucketReport {
  std::string name;
  std::size_t count = 0;
  MetricReport model;     // means over samples (fg_ratio is the mean ratio)
  MetricReport baseline;  // the input composite scored against the target
};

inline constexpr std::array<double, 3> kBucketEdges = {0.0, 0.05, 0.15};

/// 0 for [0, 5%), 1 for [5%, 15%), 2 for [15%, 100%].
int fg_bucket(double fg_ratio);

struct EvalReport {
  std::array<BucketReport, 4> buckets;  // 0-5%, 5-15%, 15-100%, overall
  std::vector<SampleEvaluation> samples;

  std::string to_json() const;
};

EvalReport evaluate(const HarmonizerModel& model, const Dataset& dataset, int threads = 1);

}  // namespace s2cr
