#pragma once

// Dense kernels shared by the inference path and reverse-mode training.

#include <Eigen/Dense>
#include <vector>

#include "s2cr/model.hpp"

namespace s2cr::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activations kept for the backward pass of one convolution block.
struct ConvTape {
  RowMatrix col;     // [in*9, out_h*out_w]
  RowMatrix output;  // rectified, [out, out_h*out_w]
  int in_h = 0;
  int in_w = 0;
  int out_h = 0;
  int out_w = 0;
};

struct EncoderTape {
  std::vector<ConvTape> blocks;
};

/// Planar image as [3, H*W].
RowMatrix image_matrix(const ImageBuffer& image);

/// Conv(3x3, stride 2, pad 1) + bias + ReLU. `tape` receives the im2col
/// buffer and the output.
void conv_forward(const ConvLayer& layer, const RowMatrix& input, int in_h, int in_w,
                  ConvTape& tape);

/// `d_output` is the gradient w.r.t. the rectified output; it is masked by the
/// ReLU in place. Accumulates into `grad`; writes d_input when non-null.
void conv_backward(const ConvLayer& layer, const ConvTape& tape, RowMatrix& d_output,
                   ConvLayer& grad, RowMatrix* d_input);

FeatureVector encode(const HarmonizerModel& model, const ImageBuffer& region,
                     EncoderTape* tape);

/// Backpropagates d(loss)/d(pooled feature) through the encoder.
void encode_backward(const HarmonizerModel& model, const EncoderTape& tape,
                     const FeatureVector& d_feature, HarmonizerModel& grad);

std::vector<double> linear_forward(const Linear& layer, std::span<const double> x);

/// Accumulates weight/bias gradients; adds W^T dy into d_x when non-null.
void linear_backward(const Linear& layer, std::span<const double> x,
                     std::span<const double> d_y, Linear& grad, std::vector<double>* d_x);

/// Hidden pre-activation and embedding for a label.
struct SemanticTape {
  std::vector<double> one_hot;
  std::vector<double> hidden;  // rectified
  std::vector<double> embedding;
};

std::vector<double> semantic_forward(const HarmonizerModel& model, SemanticLabel label,
                                     SemanticTape* tape);
void semantic_backward(const HarmonizerModel& model, const SemanticTape& tape,
                       std::span<const double> d_embedding, HarmonizerModel& grad);

/// Raw (pre-rectifier) 3L head output for one stage.
std::vector<double> head_raw(const HarmonizerModel& model, int stage,
                             std::span<const double> z_fore, std::span<const double> z_back);

/// [feature, embedding] concatenation (embedding may be empty).
std::vector<double> concat(std::span<const double> a, std::span<const double> b);

}  // namespace s2cr::nn
