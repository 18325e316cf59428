#include "amc/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Core>

#include "amc/rng.hpp"

namespace amc::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using CMapVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
AlignedVector<T>& scratch(int slot) {
    thread_local AlignedVector<T> buffers[2];
    return buffers[slot];
}

void require_rank3(const Shape& s, const char* what) {
    if (s.size() != 3) throw ShapeError(std::string(what) + ": expected an HxWxC tensor, got " + shape_string(s));
}

// Unrolls every output position's receptive field into one row of a
// (H*W) x (kh*kw*Cin) matrix; out-of-bounds taps read as zero.
template <typename T>
void im2col(const Tensor<T>& in, std::size_t kh, std::size_t kw, AlignedVector<T>& col) {
    const std::size_t H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const std::ptrdiff_t pt = static_cast<std::ptrdiff_t>((kh - 1) / 2);
    const std::ptrdiff_t pl = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    const std::size_t row_len = kh * kw * C;
    col.assign(H * W * row_len, T{});
    const T* src = in.data();
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
            T* row = col.data() + (h * W + w) * row_len;
            for (std::size_t i = 0; i < kh; ++i) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + i) - pt;
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w + j) - pl;
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                    std::copy_n(src + (ih * W + iw) * C, C, row + (i * kw + j) * C);
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const AlignedVector<T>& col, std::size_t kh, std::size_t kw, Tensor<T>& out) {
    const std::size_t H = out.dim(0), W = out.dim(1), C = out.dim(2);
    const std::ptrdiff_t pt = static_cast<std::ptrdiff_t>((kh - 1) / 2);
    const std::ptrdiff_t pl = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    const std::size_t row_len = kh * kw * C;
    T* dst = out.data();
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
            const T* row = col.data() + (h * W + w) * row_len;
            for (std::size_t i = 0; i < kh; ++i) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + i) - pt;
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w + j) - pl;
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                    T* d = dst + (ih * W + iw) * C;
                    const T* s = row + (i * kw + j) * C;
                    for (std::size_t c = 0; c < C; ++c) d[c] += s[c];
                }
            }
        }
    }
}

template <typename T>
void check_conv(const Tensor<T>& input, const ConvParams<T>& p) {
    require_rank3(input.shape(), "conv2d");
    if (p.kernel.rank() != 4 || p.bias.rank() != 1 || p.bias.dim(0) != p.out_channels())
        throw ShapeError("conv2d: malformed parameters, kernel " + p.kernel.shape_string() + ", bias " +
                         p.bias.shape_string());
    if (input.dim(2) != p.in_channels())
        throw ShapeError("conv2d: input " + input.shape_string() + " does not match kernel " +
                         p.kernel.shape_string());
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& params) {
    check_conv(input, params);
    const std::size_t H = input.dim(0), W = input.dim(1);
    const std::size_t K = params.kernel_h() * params.kernel_w() * params.in_channels();
    const std::size_t Cout = params.out_channels();
    auto& col = scratch<T>(0);
    im2col(input, params.kernel_h(), params.kernel_w(), col);

    Tensor<T> out({H, W, Cout});
    MapMat<T> y(out.data(), static_cast<Eigen::Index>(H * W), static_cast<Eigen::Index>(Cout));
    CMapMat<T> x(col.data(), static_cast<Eigen::Index>(H * W), static_cast<Eigen::Index>(K));
    CMapMat<T> k(params.kernel.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(Cout));
    y.noalias() = x * k;
    CMapVec<T> b(params.bias.data(), static_cast<Eigen::Index>(Cout));
    y.rowwise() += b.transpose();
    return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& input, const ConvParams<T>& params, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, ConvParams<T>& grad_params) {
    check_conv(input, params);
    const std::size_t H = input.dim(0), W = input.dim(1);
    const std::size_t K = params.kernel_h() * params.kernel_w() * params.in_channels();
    const std::size_t Cout = params.out_channels();
    if (grad_output.shape() != Shape{H, W, Cout})
        throw ShapeError("conv2d_backward: gradient " + grad_output.shape_string() + " does not match output " +
                         shape_string({H, W, Cout}));
    if (grad_params.kernel.shape() != params.kernel.shape() || grad_params.bias.shape() != params.bias.shape())
        throw ShapeError("conv2d_backward: gradient buffers do not match parameter shapes");

    auto& col = scratch<T>(0);
    im2col(input, params.kernel_h(), params.kernel_w(), col);
    const auto HW = static_cast<Eigen::Index>(H * W);
    CMapMat<T> x(col.data(), HW, static_cast<Eigen::Index>(K));
    CMapMat<T> dy(grad_output.data(), HW, static_cast<Eigen::Index>(Cout));
    MapMat<T> dk(grad_params.kernel.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(Cout));
    dk.noalias() += x.transpose() * dy;
    MapVec<T> db(grad_params.bias.data(), static_cast<Eigen::Index>(Cout));
    db += dy.colwise().sum().transpose();

    if (grad_input) {
        *grad_input = Tensor<T>(input.shape());
        auto& dcol = scratch<T>(1);
        dcol.resize(H * W * K);
        MapMat<T> dx(dcol.data(), HW, static_cast<Eigen::Index>(K));
        CMapMat<T> k(params.kernel.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(Cout));
        dx.noalias() = dy * k.transpose();
        col2im_add(dcol, params.kernel_h(), params.kernel_w(), *grad_input);
    }
}

template <typename T>
Tensor<T> maxpool(const Tensor<T>& input) {
    require_rank3(input.shape(), "maxpool");
    const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
    if (W % 2 != 0) throw ShapeError("maxpool: width must be even, got " + input.shape_string());
    Tensor<T> out({H, W / 2, C});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W / 2; ++w) {
            const T* a = &input.at(h, 2 * w, 0);
            const T* b = &input.at(h, 2 * w + 1, 0);
            T* o = &out.at(h, w, 0);
            for (std::size_t c = 0; c < C; ++c) o[c] = b[c] > a[c] ? b[c] : a[c];
        }
    return out;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
    require_rank3(input.shape(), "maxpool_backward");
    const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
    if (W % 2 != 0) throw ShapeError("maxpool_backward: width must be even, got " + input.shape_string());
    if (grad_output.shape() != Shape{H, W / 2, C})
        throw ShapeError("maxpool_backward: gradient " + grad_output.shape_string() + " does not match " +
                         shape_string({H, W / 2, C}));
    Tensor<T> grad(input.shape());
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W / 2; ++w) {
            const T* a = &input.at(h, 2 * w, 0);
            const T* b = &input.at(h, 2 * w + 1, 0);
            const T* g = &grad_output.at(h, w, 0);
            T* ga = &grad.at(h, 2 * w, 0);
            T* gb = &grad.at(h, 2 * w + 1, 0);
            for (std::size_t c = 0; c < C; ++c) {
                if (b[c] > a[c])
                    gb[c] = g[c];
                else
                    ga[c] = g[c];
            }
        }
    return grad;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T{0} ? v : T{0};
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
    if (input.shape() != grad_output.shape())
        throw ShapeError("relu_backward: " + input.shape_string() + " vs " + grad_output.shape_string());
    Tensor<T> g = grad_output;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input[i] > T{0})) g[i] = T{0};
    return g;
}

template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
    std::vector<T> mask(n, T{1});
    if (rate == 0.0) return mask;
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    auto eng = make_engine(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask) m = u(eng) < rate ? T{0} : keep;
    return mask;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
    if (mode == Mode::Eval || rate == 0.0) return x;
    const auto mask = dropout_mask<T>(x.size(), rate, seed);
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, double rate, Mode mode, std::uint64_t seed) {
    return dropout(grad_output, rate, mode, seed);
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseParams<T>& params) {
    if (params.weight.rank() != 2 || params.bias.rank() != 1 || params.bias.dim(0) != params.outputs())
        throw ShapeError("dense: malformed parameters, weight " + params.weight.shape_string() + ", bias " +
                         params.bias.shape_string());
    if (x.size() != params.inputs())
        throw ShapeError("dense: input " + x.shape_string() + " does not match weight " +
                         params.weight.shape_string());
    Tensor<T> y({params.outputs()});
    CMapMat<T> w(params.weight.data(), static_cast<Eigen::Index>(params.outputs()),
                 static_cast<Eigen::Index>(params.inputs()));
    CMapVec<T> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    MapVec<T> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    yv.noalias() = w * xv;
    yv += CMapVec<T>(params.bias.data(), static_cast<Eigen::Index>(y.size()));
    return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const DenseParams<T>& params, const Tensor<T>& grad_output,
                    Tensor<T>* grad_input, DenseParams<T>& grad_params) {
    if (x.size() != params.inputs() || grad_output.size() != params.outputs())
        throw ShapeError("dense_backward: input " + x.shape_string() + " / gradient " + grad_output.shape_string() +
                         " do not match weight " + params.weight.shape_string());
    if (grad_params.weight.shape() != params.weight.shape() || grad_params.bias.shape() != params.bias.shape())
        throw ShapeError("dense_backward: gradient buffers do not match parameter shapes");
    const auto out = static_cast<Eigen::Index>(params.outputs());
    const auto in = static_cast<Eigen::Index>(params.inputs());
    CMapVec<T> xv(x.data(), in);
    CMapVec<T> dy(grad_output.data(), out);
    MapMat<T> dw(grad_params.weight.data(), out, in);
    dw.noalias() += dy * xv.transpose();
    MapVec<T>(grad_params.bias.data(), out) += dy;
    if (grad_input) {
        *grad_input = Tensor<T>(x.shape());
        CMapMat<T> w(params.weight.data(), out, in);
        MapVec<T>(grad_input->data(), in).noalias() = w.transpose() * dy;
    }
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
    if (logits.empty()) throw InvalidArgument("softmax: need at least one logit");
    for (T v : logits)
        if (std::isnan(v)) throw InvalidArgument("softmax: NaN logit");
    const T mx = *std::max_element(logits.begin(), logits.end());
    std::vector<T> p(logits.size());
    T sum{0};
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

template <typename T>
double cross_entropy(std::span<const T> probs, std::size_t label) {
    if (label >= probs.size())
        throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " out of range for " +
                              std::to_string(probs.size()) + " classes");
    return -std::log(std::max(static_cast<double>(probs[label]), 1e-12));
}

template <typename T>
std::vector<T> softmax_cross_entropy_grad(std::span<const T> probs, std::size_t label) {
    if (label >= probs.size())
        throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " out of range for " +
                              std::to_string(probs.size()) + " classes");
    std::vector<T> g(probs.begin(), probs.end());
    g[label] -= T{1};
    return g;
}

template <typename T>
Tensor<T> gaussian_noise_layer(const Tensor<T>& x, double snr_db, Mode mode, std::uint64_t seed) {
    if (mode == Mode::Eval) return x;
    if (!std::isfinite(snr_db)) throw InvalidArgument("noise layer: record SNR must be finite in train mode");
    double power = 0.0;
    for (T v : x.values()) power += static_cast<double>(v) * static_cast<double>(v);
    power /= static_cast<double>(x.size());
    if (!(power > 0.0)) throw DegenerateSignal("noise layer: input has zero power");
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Tensor<T> y = x;
    for (auto& v : y.values()) v += static_cast<T>(gauss(eng));
    return y;
}

#define AMC_INSTANTIATE_LAYERS(T)                                                                              \
    template Tensor<T> conv2d(const Tensor<T>&, const ConvParams<T>&);                                         \
    template void conv2d_backward(const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&, Tensor<T>*,        \
                                  ConvParams<T>&);                                                             \
    template Tensor<T> maxpool(const Tensor<T>&);                                                              \
    template Tensor<T> maxpool_backward(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> relu(const Tensor<T>&);                                                                 \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                      \
    template std::vector<T> dropout_mask<T>(std::size_t, double, std::uint64_t);                               \
    template Tensor<T> dropout(const Tensor<T>&, double, Mode, std::uint64_t);                                 \
    template Tensor<T> dropout_backward(const Tensor<T>&, double, Mode, std::uint64_t);                        \
    template Tensor<T> dense(const Tensor<T>&, const DenseParams<T>&);                                         \
    template void dense_backward(const Tensor<T>&, const DenseParams<T>&, const Tensor<T>&, Tensor<T>*,        \
                                 DenseParams<T>&);                                                             \
    template std::vector<T> softmax(std::span<const T>);                                                       \
    template double cross_entropy(std::span<const T>, std::size_t);                                            \
    template std::vector<T> softmax_cross_entropy_grad(std::span<const T>, std::size_t);                       \
    template Tensor<T> gaussian_noise_layer(const Tensor<T>&, double, Mode, std::uint64_t);

AMC_INSTANTIATE_LAYERS(float)
AMC_INSTANTIATE_LAYERS(double)

#undef AMC_INSTANTIATE_LAYERS

}  // namespace amc::nn
