#include <cmath>

#include "s2cr/error.hpp"
#include "s2cr/nn.hpp"
#include "s2cr/training.hpp"

namespace s2cr {
namespace {

// Activations of the training forward pass.
struct Trace {
  nn::EncoderTape fore_tape;
  nn::EncoderTape back_tape;
  nn::SemanticTape semantic;
  std::vector<double> z_fore;
  std::vector<double> z_back;
  std::vector<std::vector<double>> raw;  // per stage, pre-rectifier
  std::vector<CurveParams> params;
  std::vector<ImageBuffer> stage_images;
};

void run_forward(const HarmonizerModel& model, const TrainSample& sample, Trace& t) {
  const EncoderConfig& cfg = model.config;
  const int size = cfg.thumbnail_size;
  const ImageBuffer thumb = thumbnail_of(sample.composite, size);
  const MaskBuffer thumb_mask = thumbnail_of(sample.mask, size);
  const Regions regions = split_regions(thumb, thumb_mask);
  const FeatureVector f_fore = nn::encode(model, regions.foreground, &t.fore_tape);
  const FeatureVector f_back = nn::encode(model, regions.background, &t.back_tape);

  std::vector<double> embedding;
  if (cfg.semantic) {
    if (!sample.label) fail(ErrorKind::kInvalidArgument, "semantic model requires a label");
    embedding = nn::semantic_forward(model, *sample.label, &t.semantic);
  }
  t.z_fore = nn::concat(f_fore, embedding);
  t.z_back = nn::concat(f_back, embedding);

  RenderOptions exact;
  exact.mode = RenderMode::kExact;
  for (int k = 0; k < cfg.stages; ++k) {
    std::vector<double> raw = nn::head_raw(model, k, t.z_fore, t.z_back);
    std::vector<double> rectified(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) rectified[i] = std::max(0.0, raw[i]);
    t.params.push_back(curves_from_head_output(rectified, cfg.levels));
    t.raw.push_back(std::move(raw));
    const ImageBuffer& src = k == 0 ? sample.composite : t.stage_images.back();
    t.stage_images.push_back(render_region(src, sample.mask, t.params.back(), exact));
  }
}

void check_sample(const TrainSample& s) {
  require_same_dims(s.composite, s.mask);
  require_same_dims(s.composite, s.target);
}

}  // namespace

double relative_l1(std::span<const ImageBuffer> stage_images, const ImageBuffer& target,
                   const MaskBuffer& mask) {
  if (stage_images.empty()) fail(ErrorKind::kInvalidArgument, "relative_l1 needs a stage");
  require_same_dims(target, mask);
  const std::size_t count = mask.count();
  if (count == 0) return 0.0;
  const auto m = mask.values();
  double total = 0.0;
  for (const ImageBuffer& stage : stage_images) {
    require_same_dims(stage, target);
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      const auto p = stage.plane(c);
      const auto t = target.plane(c);
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (m[i]) sum += std::abs(p[i] - t[i]);
      }
    }
    total += sum / static_cast<double>(count);
  }
  return total;
}

std::array<std::vector<double>, 3> relative_l1_grad(const ImageBuffer& stage,
                                                    const ImageBuffer& target,
                                                    const MaskBuffer& mask) {
  require_same_dims(stage, target);
  require_same_dims(target, mask);
  std::array<std::vector<double>, 3> g;
  const std::size_t count = mask.count();
  const auto m = mask.values();
  const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
  for (int c = 0; c < 3; ++c) {
    g[c].assign(stage.pixel_count(), 0.0);
    const auto p = stage.plane(c);
    const auto t = target.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!m[i]) continue;
      const double d = p[i] - t[i];
      if (d > kL1DeadZone) {
        g[c][i] = inv;
      } else if (d < -kL1DeadZone) {
        g[c][i] = -inv;
      }
    }
  }
  return g;
}

double training_loss(const HarmonizerModel& model, const TrainSample& sample) {
  check_sample(sample);
  if (sample.mask.empty_foreground()) return 0.0;
  Trace t;
  run_forward(model, sample, t);
  return relative_l1(t.stage_images, sample.target, sample.mask);
}

GradientResult backward(const HarmonizerModel& model, const TrainSample& sample) {
  check_sample(sample);
  const EncoderConfig& cfg = model.config;
  GradientResult result{0.0, HarmonizerModel::zeros_like(model),
                        std::vector<double>(cfg.stages, 0.0)};
  if (sample.mask.empty_foreground()) return result;

  Trace t;
  run_forward(model, sample, t);
  for (int k = 0; k < cfg.stages; ++k) {
    result.stage_loss[k] =
        relative_l1(std::span(&t.stage_images[k], 1), sample.target, sample.mask);
    result.loss += result.stage_loss[k];
  }

  const int levels = cfg.levels;
  const auto m = sample.mask.values();
  const std::size_t n = sample.mask.values().size();
  HarmonizerModel& grad = result.grad;
  const int feat = cfg.feature_dim;
  std::vector<double> d_fore(feat, 0.0);
  std::vector<double> d_back(feat, 0.0);
  std::vector<double> d_embed(cfg.semantic ? cfg.semantic_embed_dim : 0, 0.0);

  std::array<std::vector<double>, 3> carry;
  for (auto& plane : carry) plane.assign(n, 0.0);
  std::vector<double> sums(levels);

  for (int k = cfg.stages - 1; k >= 0; --k) {
    const ImageBuffer& input = k == 0 ? sample.composite : t.stage_images[k - 1];
    const ImageBuffer& output = t.stage_images[k];
    auto g = relative_l1_grad(output, sample.target, sample.mask);
    std::vector<double> d_params(static_cast<std::size_t>(3) * levels, 0.0);

    for (int c = 0; c < 3; ++c) {
      const ChannelCurve& curve = t.params[k].channel(c);
      const auto p = curve.weights();
      const auto x_plane = input.plane(c);
      const auto y_plane = output.plane(c);
      std::fill(sums.begin(), sums.end(), 0.0);
      double psi_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!m[i]) continue;
        const double gi = g[c][i] + carry[c][i];
        const double x = x_plane[i];
        double slope = 0.0;
        for (int j = 0; j < levels; ++j) {
          const double y = x - static_cast<double>(j) / levels;
          if (y < 0.0) break;
          if (y < 1.0) {
            sums[j] += gi * y;
            slope += p[j];
          } else {
            sums[j] += gi;
          }
        }
        psi_sum += gi * y_plane[i];
        carry[c][i] = gi * slope / curve.mass();
      }
      for (int j = 0; j < levels; ++j) {
        d_params[c * levels + j] = (sums[j] - psi_sum) / curve.mass();
      }
    }

    const std::vector<double>& raw = t.raw[k];
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (!(raw[j] > 0.0)) d_params[j] = 0.0;
    }
    std::vector<double> dz_fore;
    std::vector<double> dz_back;
    nn::linear_backward(model.heads[k].fore, t.z_fore, d_params, grad.heads[k].fore, &dz_fore);
    nn::linear_backward(model.heads[k].back, t.z_back, d_params, grad.heads[k].back, &dz_back);
    for (int j = 0; j < feat; ++j) {
      d_fore[j] += dz_fore[j];
      d_back[j] += dz_back[j];
    }
    for (std::size_t j = 0; j < d_embed.size(); ++j) {
      d_embed[j] += dz_fore[feat + j] + dz_back[feat + j];
    }
  }

  if (cfg.semantic) nn::semantic_backward(model, t.semantic, d_embed, grad);
  nn::encode_backward(model, t.fore_tape, d_fore, grad);
  nn::encode_backward(model, t.back_tape, d_back, grad);

  for (const auto& v : std::as_const(grad).parameters()) {
    for (double x : v.values) {
      if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite gradient in " + v.name);
    }
  }
  return result;
}

}  // namespace s2cr
