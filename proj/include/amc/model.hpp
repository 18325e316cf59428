#pragma once

// The modulation-family CNN: Input -> [Noise] -> (Conv -> MaxPool ->
// Dropout) x 4 -> Flatten -> Dense(ReLU) -> Dense -> softmax.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amc/dataset.hpp"
#include "amc/nn/checkpoint.hpp"
#include "amc/nn/layers.hpp"
#include "amc/nn/tensor.hpp"

namespace amc::model {

using nn::Shape;
using nn::Tensor;

// ------------------------------------------------------------------ labels

enum class LabelMode { Family, Variant };

std::string_view label_mode_name(LabelMode m);
LabelMode parse_label_mode(std::string_view s);

/// Maps container modulation ids onto class indices.
class LabelMap {
public:
    static LabelMap families();
    static LabelMap native_variants();
    static LabelMap radioml_variants();

    /// Variant mode picks the RadioML table when the records carry RadioML
    /// ids and the native table otherwise.
    static LabelMap for_records(LabelMode mode, std::span<const data::IQRecord> records);

    LabelMode mode() const { return mode_; }
    bool radioml() const { return radioml_; }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    std::size_t label_of(std::uint16_t modulation_id) const;

private:
    LabelMode mode_ = LabelMode::Family;
    bool radioml_ = false;
    std::vector<std::string> names_;
};

// ------------------------------------------------------------------- model

struct ModelConfig {
    std::size_t input_height = 2;
    std::size_t input_width = 1024;
    std::array<std::size_t, 4> conv_filters{256, 128, 64, 64};
    std::size_t dense_width = 128;
    std::size_t n_classes = 5;
    std::size_t kernel_h = 2;
    std::size_t kernel_w = 3;
    double dropout = 0.5;
    bool noise_layer = true;
    LabelMode label_mode = LabelMode::Family;
    bool radioml = false;
    std::uint64_t seed = 0;

    static ModelConfig hisarmod();
    static ModelConfig radioml_config();

    void validate() const;
};

struct LayerShape {
    std::string name;
    Shape shape;
};

/// Weights of the full stack; also used as the gradient accumulator.
template <typename T>
struct ModelParams {
    std::array<nn::ConvParams<T>, 4> conv;
    std::array<nn::DenseParams<T>, 2> dense;

    static ModelParams zeros_like(const ModelParams& other);

    std::vector<Tensor<T>*> tensors();
    std::vector<const Tensor<T>*> tensors() const;
    void fill(T v);
    void add(const ModelParams& other);
    void scale(T s);
};

struct SampleStats {
    double loss = 0.0;
    bool correct = false;
};

template <typename T>
class CnnModel {
public:
    explicit CnnModel(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const ModelParams<T>& params() const { return params_; }
    ModelParams<T>& params() { return params_; }

    /// Output dimensions of every layer, named as in the reference layout.
    const std::vector<LayerShape>& shape_trace() const { return trace_; }
    std::size_t flatten_size() const;
    std::size_t parameter_count() const;

    /// [height][width][1] tensor from I/Q samples (row 0 = I, row 1 = Q).
    Tensor<T> input_tensor(std::span<const std::complex<float>> samples) const;

    /// Eval-mode forward pass.
    std::vector<T> logits(const Tensor<T>& input) const;
    std::vector<T> probabilities(const Tensor<T>& input) const;

    /// Train-mode forward + backward for one sample; parameter gradients of
    /// the cross-entropy loss are added to `grads`.
    SampleStats accumulate_gradients(const Tensor<T>& input, std::size_t label, double snr_db, std::uint64_t seed,
                                     ModelParams<T>& grads) const;

    /// Train-mode loss only, with the same noise/dropout draws as
    /// accumulate_gradients for an identical seed.
    double train_loss(const Tensor<T>& input, std::size_t label, double snr_db, std::uint64_t seed) const;

    std::vector<nn::NamedTensor> to_checkpoint() const;
    static CnnModel from_checkpoint(const std::vector<nn::NamedTensor>& entries);

private:
    void check_input(const Tensor<T>& input) const;

    ModelConfig config_;
    ModelParams<T> params_;
    std::vector<LayerShape> trace_;
};

extern template class CnnModel<float>;
extern template class CnnModel<double>;
extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

/// Model configuration matching a dataset's geometry and label space.
ModelConfig config_for(std::span<const data::IQRecord> records, LabelMode mode, std::uint64_t seed);

}  // namespace amc::model
