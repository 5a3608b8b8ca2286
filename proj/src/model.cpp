#include "s2cr/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "s2cr/error.hpp"
#include "s2cr/nn.hpp"

namespace s2cr {
namespace {

constexpr std::string_view kLabelNames[kSemanticClassCount] = {"person", "vehicle", "animal",
                                                               "food", "other"};

// Uniform double in [lo, hi) from the top 53 bits; identical across standard
// library implementations.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Linear make_linear(int in, int out, double bound, std::mt19937_64& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight.resize(static_cast<std::size_t>(in) * out);
  for (double& w : l.weight) w = uniform(rng, -bound, bound);
  l.bias.assign(out, 0.0);
  return l;
}

template <typename Model, typename View, typename Visit>
void visit_parameters(Model& m, Visit&& visit) {
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    auto& l = m.encoder[i];
    const std::string p = "encoder." + std::to_string(i);
    visit(View{p + ".weight", {l.out, l.in, 3, 3}, l.weight});
    visit(View{p + ".bias", {l.out}, l.bias});
  }
  if (m.config.semantic) {
    visit(View{"semantic.0.weight", {m.semantic_hidden.out, m.semantic_hidden.in},
               m.semantic_hidden.weight});
    visit(View{"semantic.0.bias", {m.semantic_hidden.out}, m.semantic_hidden.bias});
    visit(View{"semantic.1.weight", {m.semantic_out.out, m.semantic_out.in},
               m.semantic_out.weight});
    visit(View{"semantic.1.bias", {m.semantic_out.out}, m.semantic_out.bias});
  }
  for (std::size_t k = 0; k < m.heads.size(); ++k) {
    const std::string p = "heads." + std::to_string(k);
    auto& h = m.heads[k];
    visit(View{p + ".fore.weight", {h.fore.out, h.fore.in}, h.fore.weight});
    visit(View{p + ".fore.bias", {h.fore.out}, h.fore.bias});
    visit(View{p + ".back.weight", {h.back.out, h.back.in}, h.back.weight});
    visit(View{p + ".back.bias", {h.back.out}, h.back.bias});
  }
}

}  // namespace

std::optional<SemanticLabel> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (int i = 0; i < kSemanticClassCount; ++i) {
    if (lower == kLabelNames[i]) return static_cast<SemanticLabel>(i);
  }
  return std::nullopt;
}

std::string_view label_name(SemanticLabel label) {
  return kLabelNames[static_cast<int>(label)];
}

void EncoderConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kInvalidArgument, "config: " + what); };
  if (thumbnail_size < 2) bad("thumbnail_size must be >= 2");
  if (block_channels.empty()) bad("block_channels must not be empty");
  for (int c : block_channels) {
    if (c < 1) bad("block channel counts must be positive");
  }
  if (feature_dim != block_channels.back()) bad("feature_dim must equal the last block width");
  if (levels < 2) bad("levels must be >= 2");
  if (stages < 1) bad("stages must be >= 1");
  if (semantic_classes != kSemanticClassCount) bad("semantic_classes must be 5");
  if (semantic_embed_dim < 1) bad("semantic_embed_dim must be >= 1");
}

HarmonizerModel HarmonizerModel::initialize(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  HarmonizerModel m;
  m.config = config;
  int in = 3;
  for (int out : config.block_channels) {
    ConvLayer l;
    l.in = in;
    l.out = out;
    const double bound = std::sqrt(6.0 / (in * 9));
    l.weight.resize(static_cast<std::size_t>(out) * in * 9);
    for (double& w : l.weight) w = uniform(rng, -bound, bound);
    l.bias.assign(out, 0.0);
    m.encoder.push_back(std::move(l));
    in = out;
  }
  if (config.semantic) {
    const int e = config.semantic_embed_dim;
    m.semantic_hidden = make_linear(config.semantic_classes, e,
                                    1.0 / std::sqrt(config.semantic_classes), rng);
    m.semantic_out = make_linear(e, e, 1.0 / std::sqrt(e), rng);
  }
  const int head_in = config.head_input_dim();
  const int head_out = 3 * config.levels;
  const double head_bound = 1e-3 / std::sqrt(head_in);
  for (int k = 0; k < config.stages; ++k) {
    StageHeads h{make_linear(head_in, head_out, head_bound, rng),
                 make_linear(head_in, head_out, head_bound, rng)};
    // Near-identity start: p_0 ~ 1 and a small remainder on the other pieces.
    for (Linear* l : {&h.fore, &h.back}) {
      for (int j = 0; j < head_out; ++j) l->bias[j] = (j % config.levels == 0) ? 0.5 : 0.0005;
    }
    m.heads.push_back(std::move(h));
  }
  return m;
}

HarmonizerModel HarmonizerModel::zeros_like(const HarmonizerModel& model) {
  HarmonizerModel z = model;
  for (auto& v : z.parameters()) std::fill(v.values.begin(), v.values.end(), 0.0);
  return z;
}

std::vector<ParamView> HarmonizerModel::parameters() {
  std::vector<ParamView> out;
  visit_parameters<HarmonizerModel, ParamView>(*this, [&](ParamView v) { out.push_back(std::move(v)); });
  return out;
}

std::vector<ConstParamView> HarmonizerModel::parameters() const {
  std::vector<ConstParamView> out;
  visit_parameters<const HarmonizerModel, ConstParamView>(
      *this, [&](ConstParamView v) { out.push_back(std::move(v)); });
  return out;
}

std::size_t HarmonizerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : parameters()) n += v.values.size();
  return n;
}

namespace nn {

RowMatrix image_matrix(const ImageBuffer& image) {
  RowMatrix m(3, static_cast<Eigen::Index>(image.pixel_count()));
  for (int c = 0; c < 3; ++c) {
    const auto p = image.plane(c);
    std::copy(p.begin(), p.end(), m.row(c).data());
  }
  return m;
}

void conv_forward(const ConvLayer& layer, const RowMatrix& input, int in_h, int in_w,
                  ConvTape& tape) {
  const int out_h = (in_h - 1) / 2 + 1;
  const int out_w = (in_w - 1) / 2 + 1;
  const int positions = out_h * out_w;
  tape.in_h = in_h;
  tape.in_w = in_w;
  tape.out_h = out_h;
  tape.out_w = out_w;
  tape.col.setZero(static_cast<Eigen::Index>(layer.in) * 9, positions);
  for (int c = 0; c < layer.in; ++c) {
    const double* src = input.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = tape.col.row(c * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= in_h) continue;
          const double* src_row = src + static_cast<std::size_t>(iy) * in_w;
          double* dst_row = dst + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            if (ix >= 0 && ix < in_w) dst_row[ox] = src_row[ix];
          }
        }
      }
    }
  }
  const Eigen::Map<const RowMatrix> w(layer.weight.data(), layer.out,
                                      static_cast<Eigen::Index>(layer.in) * 9);
  const Eigen::Map<const Eigen::VectorXd> b(layer.bias.data(), layer.out);
  tape.output.resize(layer.out, positions);
  tape.output.noalias() = w * tape.col;
  tape.output.colwise() += b;
  tape.output = tape.output.cwiseMax(0.0);
}

void conv_backward(const ConvLayer& layer, const ConvTape& tape, RowMatrix& d_output,
                   ConvLayer& grad, RowMatrix* d_input) {
  d_output = (tape.output.array() > 0.0).select(d_output, 0.0);
  const Eigen::Index k = static_cast<Eigen::Index>(layer.in) * 9;
  Eigen::Map<RowMatrix> dw(grad.weight.data(), layer.out, k);
  Eigen::Map<Eigen::VectorXd> db(grad.bias.data(), layer.out);
  dw.noalias() += d_output * tape.col.transpose();
  db += d_output.rowwise().sum();
  if (!d_input) return;

  const Eigen::Map<const RowMatrix> w(layer.weight.data(), layer.out, k);
  const RowMatrix d_col = w.transpose() * d_output;
  d_input->setZero(layer.in, static_cast<Eigen::Index>(tape.in_h) * tape.in_w);
  for (int c = 0; c < layer.in; ++c) {
    double* dst = d_input->row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = d_col.row(c * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < tape.out_h; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= tape.in_h) continue;
          double* dst_row = dst + static_cast<std::size_t>(iy) * tape.in_w;
          const double* src_row = src + static_cast<std::size_t>(oy) * tape.out_w;
          for (int ox = 0; ox < tape.out_w; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            if (ix >= 0 && ix < tape.in_w) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

FeatureVector encode(const HarmonizerModel& model, const ImageBuffer& region,
                     EncoderTape* tape) {
  const int size = model.config.thumbnail_size;
  if (region.width() != size || region.height() != size) {
    fail(ErrorKind::kDimension, "encoder expects a " + std::to_string(size) + "x" +
                                    std::to_string(size) + " region, got " +
                                    std::to_string(region.width()) + "x" +
                                    std::to_string(region.height()));
  }
  EncoderTape local;
  EncoderTape& t = tape ? *tape : local;
  t.blocks.assign(model.encoder.size(), ConvTape{});
  RowMatrix input = image_matrix(region);
  int h = size;
  int w = size;
  for (std::size_t i = 0; i < model.encoder.size(); ++i) {
    const RowMatrix& src = i == 0 ? input : t.blocks[i - 1].output;
    conv_forward(model.encoder[i], src, h, w, t.blocks[i]);
    h = t.blocks[i].out_h;
    w = t.blocks[i].out_w;
    if (!tape && i > 0) {
      // Inference does not need earlier activations.
      t.blocks[i - 1].col.resize(0, 0);
      t.blocks[i - 1].output.resize(0, 0);
      t.blocks[i].col.resize(0, 0);
    }
  }
  const RowMatrix& last = t.blocks.back().output;
  const Eigen::VectorXd pooled = last.rowwise().mean();
  return FeatureVector(pooled.data(), pooled.data() + pooled.size());
}

void encode_backward(const HarmonizerModel& model, const EncoderTape& tape,
                     const FeatureVector& d_feature, HarmonizerModel& grad) {
  const std::size_t n = model.encoder.size();
  const ConvTape& last = tape.blocks.back();
  const double inv = 1.0 / (static_cast<double>(last.out_h) * last.out_w);
  RowMatrix d_out(last.output.rows(), last.output.cols());
  for (Eigen::Index r = 0; r < d_out.rows(); ++r) d_out.row(r).setConstant(d_feature[r] * inv);
  for (std::size_t i = n; i-- > 0;) {
    RowMatrix d_in;
    conv_backward(model.encoder[i], tape.blocks[i], d_out, grad.encoder[i],
                  i > 0 ? &d_in : nullptr);
    if (i > 0) d_out = std::move(d_in);
  }
}

std::vector<double> linear_forward(const Linear& layer, std::span<const double> x) {
  if (static_cast<int>(x.size()) != layer.in) {
    fail(ErrorKind::kDimension, "linear layer input size mismatch");
  }
  const Eigen::Map<const RowMatrix> w(layer.weight.data(), layer.out, layer.in);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), layer.in);
  const Eigen::Map<const Eigen::VectorXd> b(layer.bias.data(), layer.out);
  const Eigen::VectorXd y = w * xv + b;
  return std::vector<double>(y.data(), y.data() + y.size());
}

void linear_backward(const Linear& layer, std::span<const double> x,
                     std::span<const double> d_y, Linear& grad, std::vector<double>* d_x) {
  Eigen::Map<RowMatrix> dw(grad.weight.data(), layer.out, layer.in);
  Eigen::Map<Eigen::VectorXd> db(grad.bias.data(), layer.out);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), layer.in);
  const Eigen::Map<const Eigen::VectorXd> dy(d_y.data(), layer.out);
  dw.noalias() += dy * xv.transpose();
  db += dy;
  if (d_x) {
    const Eigen::Map<const RowMatrix> w(layer.weight.data(), layer.out, layer.in);
    d_x->resize(layer.in);
    Eigen::Map<Eigen::VectorXd> dx(d_x->data(), layer.in);
    dx.noalias() = w.transpose() * dy;
  }
}

std::vector<double> semantic_forward(const HarmonizerModel& model, SemanticLabel label,
                                     SemanticTape* tape) {
  std::vector<double> one_hot(model.config.semantic_classes, 0.0);
  one_hot[static_cast<int>(label)] = 1.0;
  std::vector<double> hidden = linear_forward(model.semantic_hidden, one_hot);
  for (double& v : hidden) v = std::max(0.0, v);
  std::vector<double> embedding = linear_forward(model.semantic_out, hidden);
  if (tape) {
    tape->one_hot = one_hot;
    tape->hidden = hidden;
    tape->embedding = embedding;
  }
  return embedding;
}

void semantic_backward(const HarmonizerModel& model, const SemanticTape& tape,
                       std::span<const double> d_embedding, HarmonizerModel& grad) {
  std::vector<double> d_hidden;
  linear_backward(model.semantic_out, tape.hidden, d_embedding, grad.semantic_out, &d_hidden);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) {
    if (!(tape.hidden[i] > 0.0)) d_hidden[i] = 0.0;
  }
  linear_backward(model.semantic_hidden, tape.one_hot, d_hidden, grad.semantic_hidden, nullptr);
}

std::vector<double> head_raw(const HarmonizerModel& model, int stage,
                             std::span<const double> z_fore, std::span<const double> z_back) {
  const StageHeads& h = model.heads.at(stage);
  std::vector<double> raw = linear_forward(h.fore, z_fore);
  const std::vector<double> back = linear_forward(h.back, z_back);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += back[i];
  return raw;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace nn

FeatureVector encode(const HarmonizerModel& model, const ImageBuffer& region) {
  return nn::encode(model, region, nullptr);
}

std::vector<double> semantic_embedding(const HarmonizerModel& model, SemanticLabel label) {
  if (!model.config.semantic) fail(ErrorKind::kInvalidArgument, "model has no semantic branch");
  return nn::semantic_forward(model, label, nullptr);
}

CurveParams curves_from_head_output(std::span<const double> rectified, int levels) {
  std::array<std::vector<double>, 3> w;
  for (int c = 0; c < 3; ++c) {
    w[c].assign(rectified.begin() + c * levels, rectified.begin() + (c + 1) * levels);
    w[c][0] += kPieceFloor;
  }
  return CurveParams(ChannelCurve(std::move(w[0])), ChannelCurve(std::move(w[1])),
                     ChannelCurve(std::move(w[2])));
}

CurveParams predict_params(const HarmonizerModel& model, const FeatureVector& f_fore,
                           const FeatureVector& f_back, int stage,
                           std::optional<SemanticLabel> label) {
  const EncoderConfig& cfg = model.config;
  if (stage < 0 || stage >= cfg.stages) {
    fail(ErrorKind::kInvalidArgument, "stage index out of range");
  }
  std::vector<double> embedding;
  if (cfg.semantic) {
    if (!label) fail(ErrorKind::kInvalidArgument, "semantic model requires a label");
    embedding = nn::semantic_forward(model, *label, nullptr);
  }
  std::vector<double> raw = nn::head_raw(model, stage, nn::concat(f_fore, embedding),
                                         nn::concat(f_back, embedding));
  for (double& v : raw) v = std::max(0.0, v);
  return curves_from_head_output(raw, cfg.levels);
}

Thumbnail make_thumbnail(const HarmonizerModel& model, const ImageBuffer& composite,
                         const MaskBuffer& mask) {
  require_same_dims(composite, mask);
  const int size = model.config.thumbnail_size;
  return Thumbnail{thumbnail_of(composite, size), thumbnail_of(mask, size)};
}

ThumbnailFeatures extract_features(const HarmonizerModel& model, const ImageBuffer& composite,
                                   const MaskBuffer& mask) {
  const Thumbnail thumb = make_thumbnail(model, composite, mask);
  const Regions regions = split_regions(thumb.image, thumb.mask);
  return ThumbnailFeatures{encode(model, regions.foreground), encode(model, regions.background)};
}

Prediction predict_from_thumbnail(const HarmonizerModel& model, const Thumbnail& thumb,
                                  bool empty_mask, std::optional<SemanticLabel> label) {
  if (model.config.semantic && !label) {
    fail(ErrorKind::kInvalidArgument, "semantic model requires a label");
  }
  Prediction p;
  if (empty_mask) {
    p.empty_mask = true;
    p.stage_params.assign(model.config.stages, CurveParams::identity(model.config.levels));
    return p;
  }
  const Regions regions = split_regions(thumb.image, thumb.mask);
  const FeatureVector fore = encode(model, regions.foreground);
  const FeatureVector back = encode(model, regions.background);
  for (int k = 0; k < model.config.stages; ++k) {
    p.stage_params.push_back(predict_params(model, fore, back, k, label));
  }
  return p;
}

Prediction predict_curves(const HarmonizerModel& model, const ImageBuffer& composite,
                          const MaskBuffer& mask, std::optional<SemanticLabel> label) {
  require_same_dims(composite, mask);
  if (model.config.semantic && !label) {
    fail(ErrorKind::kInvalidArgument, "semantic model requires a label");
  }
  if (mask.empty_foreground()) return predict_from_thumbnail(model, {}, true, label);
  return predict_from_thumbnail(model, make_thumbnail(model, composite, mask), false, label);
}

std::vector<ImageBuffer> render_stages(const ImageBuffer& composite, const MaskBuffer& mask,
                                       const std::vector<CurveParams>& stages,
                                       const RenderOptions& render) {
  require_same_dims(composite, mask);
  std::vector<ImageBuffer> out;
  out.reserve(stages.size());
  for (const CurveParams& params : stages) {
    const ImageBuffer& src = out.empty() ? composite : out.back();
    out.push_back(render_region(src, mask, params, render));
  }
  return out;
}

ForwardResult forward(const HarmonizerModel& model, const ImageBuffer& composite,
                      const MaskBuffer& mask, std::optional<SemanticLabel> label,
                      const RenderOptions& render) {
  Prediction p = predict_curves(model, composite, mask, label);
  ForwardResult r;
  r.empty_mask = p.empty_mask;
  r.stage_params = std::move(p.stage_params);
  if (r.empty_mask) {
    r.warning = "empty foreground mask; returning the input unchanged";
    r.stage_images.assign(r.stage_params.size(), composite);
    return r;
  }
  r.stage_images = render_stages(composite, mask, r.stage_params, render);
  return r;
}

}  // namespace s2cr
