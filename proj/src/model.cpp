#include "amc/model.hpp"

#include <cmath>
#include <random>

#include "amc/errors.hpp"
#include "amc/rng.hpp"

namespace amc::model {

using nn::Mode;

std::string_view label_mode_name(LabelMode m) { return m == LabelMode::Family ? "family" : "variant"; }

LabelMode parse_label_mode(std::string_view s) {
    if (s == "family" || s == "families") return LabelMode::Family;
    if (s == "variant" || s == "variants") return LabelMode::Variant;
    throw InvalidArgument("unknown label mode '" + std::string(s) + "' (expected family or variant)");
}

LabelMap LabelMap::families() {
    LabelMap m;
    m.mode_ = LabelMode::Family;
    for (int f = 0; f < dsp::kFamilyCount; ++f) m.names_.emplace_back(dsp::family_name(static_cast<dsp::Family>(f)));
    return m;
}

LabelMap LabelMap::native_variants() {
    LabelMap m;
    m.mode_ = LabelMode::Variant;
    for (auto v : dsp::all_variants()) m.names_.emplace_back(dsp::variant_name(v));
    return m;
}

LabelMap LabelMap::radioml_variants() {
    LabelMap m;
    m.mode_ = LabelMode::Variant;
    m.radioml_ = true;
    for (auto n : data::kRadioMLNames) m.names_.emplace_back(n);
    return m;
}

LabelMap LabelMap::for_records(LabelMode mode, std::span<const data::IQRecord> records) {
    if (mode == LabelMode::Family) return families();
    const bool rml = !records.empty() && data::is_radioml_id(records.front().modulation);
    return rml ? radioml_variants() : native_variants();
}

std::size_t LabelMap::label_of(std::uint16_t id) const {
    if (mode_ == LabelMode::Family) return static_cast<std::size_t>(data::family_of_id(id));
    if (radioml_ && data::is_radioml_id(id)) return id - data::kRadioMLBase;
    if (!radioml_ && data::is_native_id(id)) return id;
    throw InvalidArgument("modulation id " + std::to_string(id) + " has no class in this label space");
}

// ------------------------------------------------------------------- config

ModelConfig ModelConfig::hisarmod() { return {}; }

ModelConfig ModelConfig::radioml_config() {
    ModelConfig c;
    c.input_width = 128;
    c.n_classes = 10;
    c.noise_layer = false;
    c.label_mode = LabelMode::Variant;
    c.radioml = true;
    return c;
}

void ModelConfig::validate() const {
    if (input_height < 1 || input_width < 1) throw InvalidArgument("model input must be non-empty");
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        if (conv_filters[i] < 1) throw InvalidArgument("Conv" + std::to_string(i + 1) + ": needs at least one filter");
        if (i > 0 && conv_filters[i] > conv_filters[i - 1])
            throw InvalidArgument("Conv" + std::to_string(i + 1) + ": filter schedule must be non-increasing");
    }
    if (n_classes < 2) throw InvalidArgument("Dense2: need at least two classes");
    if (dense_width < 1) throw InvalidArgument("Dense1: needs at least one unit");
    if (kernel_h < 1 || kernel_w < 1) throw InvalidArgument("kernel dimensions must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
    if (noise_layer && radioml) throw InvalidArgument("Noise Layer: not used for RadioML-geometry models");
}

ModelConfig config_for(std::span<const data::IQRecord> records, LabelMode mode, std::uint64_t seed) {
    if (records.empty()) throw InvalidArgument("cannot size a model from an empty dataset");
    const bool rml = data::is_radioml_id(records.front().modulation);
    ModelConfig c = rml ? ModelConfig::radioml_config() : ModelConfig::hisarmod();
    c.input_width = records.front().samples.size();
    c.label_mode = mode;
    c.n_classes = LabelMap::for_records(mode, records).size();
    c.seed = seed;
    return c;
}

// ------------------------------------------------------------------- params

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like(const ModelParams& other) {
    ModelParams p;
    for (std::size_t i = 0; i < 4; ++i)
        p.conv[i] = {Tensor<T>(other.conv[i].kernel.shape()), Tensor<T>(other.conv[i].bias.shape())};
    for (std::size_t i = 0; i < 2; ++i)
        p.dense[i] = {Tensor<T>(other.dense[i].weight.shape()), Tensor<T>(other.dense[i].bias.shape())};
    return p;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::tensors() {
    std::vector<Tensor<T>*> v;
    for (auto& c : conv) {
        v.push_back(&c.kernel);
        v.push_back(&c.bias);
    }
    for (auto& d : dense) {
        v.push_back(&d.weight);
        v.push_back(&d.bias);
    }
    return v;
}

template <typename T>
std::vector<const Tensor<T>*> ModelParams<T>::tensors() const {
    auto v = const_cast<ModelParams*>(this)->tensors();
    return {v.begin(), v.end()};
}

template <typename T>
void ModelParams<T>::fill(T v) {
    for (auto* t : tensors()) t->fill(v);
}

template <typename T>
void ModelParams<T>::add(const ModelParams& other) {
    auto dst = tensors();
    auto src = other.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        T* d = dst[i]->data();
        const T* s = src[i]->data();
        for (std::size_t j = 0; j < dst[i]->size(); ++j) d[j] += s[j];
    }
}

template <typename T>
void ModelParams<T>::scale(T s) {
    for (auto* t : tensors())
        for (auto& v : t->values()) v *= s;
}

// -------------------------------------------------------------------- model

namespace {

const char* kConvNames[] = {"Conv1", "Conv2", "Conv3", "Conv4"};

std::uint64_t layer_seed(std::uint64_t sample_seed, Stream s, std::size_t layer) {
    return derive_seed(derive_seed(sample_seed, s), layer);
}

}  // namespace

template <typename T>
CnnModel<T>::CnnModel(ModelConfig config) : config_(config) {
    config_.validate();
    const std::size_t H = config_.input_height;
    std::size_t W = config_.input_width;

    trace_.push_back({"Input", {H, W}});
    if (config_.noise_layer) trace_.push_back({"Noise Layer", {H, W}});
    std::size_t cin = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t cout = config_.conv_filters[i];
        trace_.push_back({kConvNames[i], {H, W, cout}});
        if (W % 2 != 0)
            throw ShapeError("Max_Pool" + std::to_string(i + 1) + ": width " + std::to_string(W) +
                             " is odd and cannot be halved");
        W /= 2;
        trace_.push_back({"Max_Pool" + std::to_string(i + 1), {H, W, cout}});
        trace_.push_back({"Dropout" + std::to_string(i + 1), {H, W, cout}});
        params_.conv[i] = nn::ConvParams<T>::zeros(config_.kernel_h, config_.kernel_w, cin, cout);
        cin = cout;
    }
    const std::size_t flat = H * W * cin;
    trace_.push_back({"Flatten", {flat}});
    trace_.push_back({"Dense1", {config_.dense_width}});
    trace_.push_back({"Dense2", {config_.n_classes}});
    params_.dense[0] = nn::DenseParams<T>::zeros(flat, config_.dense_width);
    params_.dense[1] = nn::DenseParams<T>::zeros(config_.dense_width, config_.n_classes);

    // Fan-in scaled uniform init (He uniform); biases start at zero.
    auto eng = make_engine(derive_seed(config_.seed, Stream::Init));
    auto init = [&](Tensor<T>& w, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& v : w.values()) v = static_cast<T>(u(eng));
    };
    for (auto& c : params_.conv) init(c.kernel, c.kernel_h() * c.kernel_w() * c.in_channels());
    for (auto& d : params_.dense) init(d.weight, d.inputs());
}

template <typename T>
std::size_t CnnModel<T>::flatten_size() const {
    return params_.dense[0].inputs();
}

template <typename T>
std::size_t CnnModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : params_.tensors()) n += t->size();
    return n;
}

template <typename T>
Tensor<T> CnnModel<T>::input_tensor(std::span<const std::complex<float>> samples) const {
    if (config_.input_height != 2)
        throw ShapeError("I/Q input requires a model of height 2, got " + std::to_string(config_.input_height));
    if (samples.size() != config_.input_width)
        throw ShapeError("record has " + std::to_string(samples.size()) + " samples, model expects " +
                         std::to_string(config_.input_width) + " (input 2x" + std::to_string(config_.input_width) +
                         ")");
    const std::size_t W = config_.input_width;
    Tensor<T> t({2, W, 1});
    for (std::size_t w = 0; w < W; ++w) {
        t[w] = static_cast<T>(samples[w].real());
        t[W + w] = static_cast<T>(samples[w].imag());
    }
    return t;
}

template <typename T>
void CnnModel<T>::check_input(const Tensor<T>& input) const {
    const Shape want{config_.input_height, config_.input_width, 1};
    if (input.shape() != want)
        throw ShapeError("model input " + input.shape_string() + " does not match " + nn::shape_string(want));
}

template <typename T>
std::vector<T> CnnModel<T>::logits(const Tensor<T>& input) const {
    check_input(input);
    Tensor<T> a = input;
    for (std::size_t i = 0; i < 4; ++i) a = nn::maxpool(nn::relu(nn::conv2d(a, params_.conv[i])));
    a = std::move(a).reshaped({a.size()});
    const auto h = nn::relu(nn::dense(a, params_.dense[0]));
    const auto y = nn::dense(h, params_.dense[1]);
    return {y.values().begin(), y.values().end()};
}

template <typename T>
std::vector<T> CnnModel<T>::probabilities(const Tensor<T>& input) const {
    const auto y = logits(input);
    return nn::softmax<T>(y);
}

template <typename T>
SampleStats CnnModel<T>::accumulate_gradients(const Tensor<T>& input, std::size_t label, double snr_db,
                                              std::uint64_t seed, ModelParams<T>& grads) const {
    check_input(input);
    if (label >= config_.n_classes)
        throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                              std::to_string(config_.n_classes) + " classes");
    const double rate = config_.dropout;

    std::array<Tensor<T>, 4> conv_in, conv_out, pooled_in;
    Tensor<T> a = config_.noise_layer ? nn::gaussian_noise_layer(input, snr_db, Mode::Train,
                                                                 layer_seed(seed, Stream::NoiseLayer, 0))
                                      : input;
    for (std::size_t i = 0; i < 4; ++i) {
        conv_in[i] = std::move(a);
        conv_out[i] = nn::conv2d(conv_in[i], params_.conv[i]);
        pooled_in[i] = nn::relu(conv_out[i]);
        a = nn::dropout(nn::maxpool(pooled_in[i]), rate, Mode::Train, layer_seed(seed, Stream::Dropout, i));
    }
    const Shape last_shape = a.shape();
    const Tensor<T> flat = std::move(a).reshaped({nn::shape_size(last_shape)});
    const Tensor<T> h = nn::dense(flat, params_.dense[0]);
    const Tensor<T> hr = nn::relu(h);
    const Tensor<T> y = nn::dense(hr, params_.dense[1]);
    for (T v : y.values())
        if (!std::isfinite(v)) throw TrainingDivergence("non-finite logits");
    const auto probs = nn::softmax<T>(y.values());

    SampleStats stats;
    stats.loss = nn::cross_entropy<T>(probs, label);
    stats.correct = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()) == label;

    const auto gy = nn::softmax_cross_entropy_grad<T>(probs, label);
    Tensor<T> g({gy.size()}, std::vector<T>(gy.begin(), gy.end()));
    Tensor<T> g_hr;
    nn::dense_backward(hr, params_.dense[1], g, &g_hr, grads.dense[1]);
    const Tensor<T> g_h = nn::relu_backward(h, g_hr);
    Tensor<T> g_flat;
    nn::dense_backward(flat, params_.dense[0], g_h, &g_flat, grads.dense[0]);
    Tensor<T> g_a = std::move(g_flat).reshaped(last_shape);
    for (std::size_t i = 4; i-- > 0;) {
        g_a = nn::dropout_backward(g_a, rate, Mode::Train, layer_seed(seed, Stream::Dropout, i));
        g_a = nn::maxpool_backward(pooled_in[i], g_a);
        g_a = nn::relu_backward(conv_out[i], g_a);
        Tensor<T> g_in;
        nn::conv2d_backward(conv_in[i], params_.conv[i], g_a, i > 0 ? &g_in : nullptr, grads.conv[i]);
        g_a = std::move(g_in);
    }
    return stats;
}

template <typename T>
double CnnModel<T>::train_loss(const Tensor<T>& input, std::size_t label, double snr_db, std::uint64_t seed) const {
    check_input(input);
    Tensor<T> a = config_.noise_layer ? nn::gaussian_noise_layer(input, snr_db, Mode::Train,
                                                                 layer_seed(seed, Stream::NoiseLayer, 0))
                                      : input;
    for (std::size_t i = 0; i < 4; ++i)
        a = nn::dropout(nn::maxpool(nn::relu(nn::conv2d(a, params_.conv[i]))), config_.dropout, Mode::Train,
                        layer_seed(seed, Stream::Dropout, i));
    a = std::move(a).reshaped({a.size()});
    const auto y = nn::dense(nn::relu(nn::dense(a, params_.dense[0])), params_.dense[1]);
    return nn::cross_entropy<T>(nn::softmax<T>(y.values()), label);
}

template <typename T>
std::vector<nn::NamedTensor> CnnModel<T>::to_checkpoint() const {
    std::vector<nn::NamedTensor> out;
    const auto& c = config_;
    const float label_code = c.label_mode == LabelMode::Family ? 0.0f : (c.radioml ? 2.0f : 1.0f);
    out.push_back({"meta",
                   Tensor<float>({8}, {static_cast<float>(c.input_height), static_cast<float>(c.input_width),
                                       static_cast<float>(c.n_classes), c.noise_layer ? 1.0f : 0.0f,
                                       static_cast<float>(c.dropout), label_code, static_cast<float>(c.kernel_h),
                                       static_cast<float>(c.kernel_w)})});
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string n = "conv" + std::to_string(i + 1);
        out.push_back({n + ".kernel", nn::tensor_cast<float>(params_.conv[i].kernel)});
        out.push_back({n + ".bias", nn::tensor_cast<float>(params_.conv[i].bias)});
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string n = "dense" + std::to_string(i + 1);
        out.push_back({n + ".weight", nn::tensor_cast<float>(params_.dense[i].weight)});
        out.push_back({n + ".bias", nn::tensor_cast<float>(params_.dense[i].bias)});
    }
    return out;
}

template <typename T>
CnnModel<T> CnnModel<T>::from_checkpoint(const std::vector<nn::NamedTensor>& entries) {
    auto find = [&](const std::string& name) -> const Tensor<float>& {
        for (const auto& e : entries)
            if (e.name == name) return e.tensor;
        throw ParseError("checkpoint has no entry '" + name + "'", 0);
    };
    const auto& meta = find("meta");
    if (meta.size() != 8) throw ParseError("checkpoint meta entry has " + std::to_string(meta.size()) + " values", 0);
    ModelConfig c;
    c.input_height = static_cast<std::size_t>(meta[0]);
    c.input_width = static_cast<std::size_t>(meta[1]);
    c.n_classes = static_cast<std::size_t>(meta[2]);
    c.noise_layer = meta[3] != 0.0f;
    c.dropout = meta[4];
    c.label_mode = meta[5] == 0.0f ? LabelMode::Family : LabelMode::Variant;
    c.radioml = meta[5] == 2.0f;
    c.kernel_h = static_cast<std::size_t>(meta[6]);
    c.kernel_w = static_cast<std::size_t>(meta[7]);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& k = find("conv" + std::to_string(i + 1) + ".kernel");
        if (k.rank() != 4) throw ShapeError("conv" + std::to_string(i + 1) + ".kernel must be rank 4");
        c.conv_filters[i] = k.dim(3);
    }
    const auto& d1 = find("dense1.weight");
    if (d1.rank() != 2) throw ShapeError("dense1.weight must be rank 2");
    c.dense_width = d1.dim(0);

    CnnModel<T> m(c);
    auto assign = [&](Tensor<T>& dst, const std::string& name) {
        const auto& src = find(name);
        if (src.shape() != dst.shape())
            throw ShapeError("checkpoint entry '" + name + "' has shape " + src.shape_string() + ", model expects " +
                             dst.shape_string());
        dst = nn::tensor_cast<T>(src);
    };
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string n = "conv" + std::to_string(i + 1);
        assign(m.params_.conv[i].kernel, n + ".kernel");
        assign(m.params_.conv[i].bias, n + ".bias");
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string n = "dense" + std::to_string(i + 1);
        assign(m.params_.dense[i].weight, n + ".weight");
        assign(m.params_.dense[i].bias, n + ".bias");
    }
    return m;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class CnnModel<float>;
template class CnnModel<double>;

}  // namespace amc::model
