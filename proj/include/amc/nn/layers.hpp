#pragma once

// Forward and backward passes of the fixed layer set. Backward functions
// accumulate parameter gradients into the caller's buffers (+=) so a batch
// can be reduced sample by sample.

#include <cstdint>
#include <span>
#include <vector>

#include "amc/nn/tensor.hpp"

namespace amc::nn {

enum class Mode { Train, Eval };

template <typename T>
struct ConvParams {
    Tensor<T> kernel;  // [kernel_h][kernel_w][in_channels][out_channels]
    Tensor<T> bias;    // [out_channels]

    std::size_t kernel_h() const { return kernel.dim(0); }
    std::size_t kernel_w() const { return kernel.dim(1); }
    std::size_t in_channels() const { return kernel.dim(2); }
    std::size_t out_channels() const { return kernel.dim(3); }

    static ConvParams zeros(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
        return {Tensor<T>({kh, kw, cin, cout}), Tensor<T>({cout})};
    }
};

template <typename T>
struct DenseParams {
    Tensor<T> weight;  // [outputs][inputs]
    Tensor<T> bias;    // [outputs]

    std::size_t inputs() const { return weight.dim(1); }
    std::size_t outputs() const { return weight.dim(0); }

    static DenseParams zeros(std::size_t in, std::size_t out) { return {Tensor<T>({out, in}), Tensor<T>({out})}; }
};

/// "Same" cross-correlation over an [H][W][Cin] input: spatial size is
/// preserved with zero padding (k-1)/2 before and k/2 after on each axis.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& params);

/// grad_input may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward(const Tensor<T>& input, const ConvParams<T>& params, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, ConvParams<T>& grad_params);

/// 1x2 max pooling along the width axis; width must be even.
template <typename T>
Tensor<T> maxpool(const Tensor<T>& input);

/// Routes each output gradient to its window's argmax (first element on ties).
template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Gradient passes where the forward input was strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

/// Inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed);

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, std::uint64_t seed);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, double rate, Mode mode, std::uint64_t seed);

/// y = W x + b over the flattened input.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseParams<T>& params);

template <typename T>
void dense_backward(const Tensor<T>& x, const DenseParams<T>& params, const Tensor<T>& grad_output,
                    Tensor<T>* grad_input, DenseParams<T>& grad_params);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// -log(max(p[label], 1e-12)).
template <typename T>
double cross_entropy(std::span<const T> probs, std::size_t label);

/// d(cross_entropy(softmax(y)))/dy = p - onehot(label).
template <typename T>
std::vector<T> softmax_cross_entropy_grad(std::span<const T> probs, std::size_t label);

/// Adds white Gaussian noise at snr_db relative to the measured power of x,
/// treating the values as I/Q pairs (so the per-element variance is
/// mean(x^2) / 10^(snr/10)). Identity in eval mode.
template <typename T>
Tensor<T> gaussian_noise_layer(const Tensor<T>& x, double snr_db, Mode mode, std::uint64_t seed);

}  // namespace amc::nn
