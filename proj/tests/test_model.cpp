#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "amc/dataset.hpp"
#include "amc/errors.hpp"
#include "amc/model.hpp"
#include "amc/rng.hpp"
#include "amc/trainer.hpp"
#include "oracles.hpp"

using namespace amc;
using namespace amc::model;

namespace {

ModelConfig tiny(std::size_t width = 16, std::size_t classes = 3, bool noise = true) {
    ModelConfig c;
    c.input_width = width;
    c.conv_filters = {4, 3, 3, 2};
    c.dense_width = 6;
    c.n_classes = classes;
    c.noise_layer = noise;
    c.seed = 42;
    return c;
}

std::vector<std::complex<float>> random_iq(std::size_t n, std::uint64_t seed) {
    auto eng = make_engine(seed);
    std::normal_distribution<float> g(0.0f, 0.7f);
    std::vector<std::complex<float>> v(n);
    for (auto& x : v) x = {g(eng), g(eng)};
    return v;
}

// Rows of the published layout table, in order; "--" rows are absent.
const std::vector<std::pair<std::string, Shape>> kHisarRows{
    {"Input", {2, 1024}},           {"Noise Layer", {2, 1024}},     {"Conv1", {2, 1024, 256}},
    {"Max_Pool1", {2, 512, 256}},   {"Dropout1", {2, 512, 256}},    {"Conv2", {2, 512, 128}},
    {"Max_Pool2", {2, 256, 128}},   {"Dropout2", {2, 256, 128}},    {"Conv3", {2, 256, 64}},
    {"Max_Pool3", {2, 128, 64}},    {"Dropout3", {2, 128, 64}},     {"Conv4", {2, 128, 64}},
    {"Max_Pool4", {2, 64, 64}},     {"Dropout4", {2, 64, 64}},      {"Flatten", {8192}},
    {"Dense1", {128}},              {"Dense2", {5}}};
const std::vector<std::pair<std::string, Shape>> kRadioRows{
    {"Input", {2, 128}},          {"Conv1", {2, 128, 256}},   {"Max_Pool1", {2, 64, 256}},
    {"Dropout1", {2, 64, 256}},   {"Conv2", {2, 64, 128}},    {"Max_Pool2", {2, 32, 128}},
    {"Dropout2", {2, 32, 128}},   {"Conv3", {2, 32, 64}},     {"Max_Pool3", {2, 16, 64}},
    {"Dropout3", {2, 16, 64}},    {"Conv4", {2, 16, 64}},     {"Max_Pool4", {2, 8, 64}},
    {"Dropout4", {2, 8, 64}},     {"Flatten", {1024}},        {"Dense1", {128}},
    {"Dense2", {10}}};

void check_trace(const std::vector<LayerShape>& got, const std::vector<std::pair<std::string, Shape>>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CAPTURE(want[i].first);
        CHECK(got[i].name == want[i].first);
        CHECK(got[i].shape == want[i].second);
    }
}

}  // namespace

TEST_CASE("shape trace matches the layout table") {
    const CnnModel<float> h(ModelConfig::hisarmod());
    check_trace(h.shape_trace(), kHisarRows);
    CHECK(h.flatten_size() == 8192);
    const CnnModel<float> r(ModelConfig::radioml_config());
    check_trace(r.shape_trace(), kRadioRows);
    CHECK(r.flatten_size() == 1024);

    // Parameter count from the layer schedule: kh*kw*cin*cout + cout per conv, in*out + out per dense.
    auto count = [](const ModelConfig& c) {
        std::size_t n = 0, cin = 1;
        for (auto f : c.conv_filters) {
            n += c.kernel_h * c.kernel_w * cin * f + f;
            cin = f;
        }
        const std::size_t flat = c.input_height * (c.input_width >> 4) * cin;
        return n + flat * c.dense_width + c.dense_width + c.dense_width * c.n_classes + c.n_classes;
    };
    CHECK(h.parameter_count() == count(ModelConfig::hisarmod()));
    CHECK(r.parameter_count() == count(ModelConfig::radioml_config()));

    auto odd = ModelConfig::hisarmod();
    odd.input_width = 1000;  // 1000 / 8 = 125 is odd at the fourth pool
    try {
        CnnModel<float> m(odd);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("Max_Pool4") != std::string::npos);
    }
    auto bad = ModelConfig::radioml_config();
    bad.noise_layer = true;
    CHECK_THROWS_AS(CnnModel<float>{bad}, InvalidArgument);
}

TEST_CASE("label maps") {
    CHECK(LabelMap::families().size() == 5);
    CHECK(LabelMap::native_variants().size() == 26);
    CHECK(LabelMap::radioml_variants().size() == 10);
    const auto fam = LabelMap::families();
    CHECK(fam.names()[fam.label_of(static_cast<std::uint16_t>(dsp::Variant::QPSK))] == "PSK");
    CHECK(fam.label_of(data::modulation_id("QAM16")) == static_cast<std::size_t>(dsp::Family::QAM));
    CHECK(LabelMap::radioml_variants().label_of(data::modulation_id("WBFM")) == 1);
    CHECK_THROWS_AS(LabelMap::native_variants().label_of(data::kRadioMLBase), InvalidArgument);
    CHECK(parse_label_mode("family") == LabelMode::Family);
    CHECK(parse_label_mode("variant") == LabelMode::Variant);
    CHECK_THROWS_AS(parse_label_mode("order"), InvalidArgument);

    std::vector<data::IQRecord> recs(1);
    recs[0].samples.resize(1024);
    CHECK(config_for(recs, LabelMode::Family, 1).n_classes == 5);
    CHECK(config_for(recs, LabelMode::Variant, 1).n_classes == 26);
    recs[0].modulation = data::kRadioMLBase + 3;
    recs[0].samples.resize(128);
    const auto rc = config_for(recs, LabelMode::Variant, 1);
    CHECK(rc.n_classes == 10);
    CHECK(rc.input_width == 128);
    CHECK_FALSE(rc.noise_layer);
}

TEST_CASE("whole-network gradient matches finite differences (64-bit)") {
    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        CAPTURE(inst);
        auto cfg = tiny();
        cfg.seed = 100 + inst;
        CnnModel<double> net(cfg);
        // Small non-zero biases so no unit sits exactly on a ReLU kink.
        auto eng = make_engine(inst);
        std::uniform_real_distribution<double> u(0.05, 0.15);
        for (auto& c : net.params().conv)
            for (auto& b : c.bias.values()) b = u(eng);
        for (auto& d : net.params().dense)
            for (auto& b : d.bias.values()) b = u(eng);

        const auto iq = random_iq(16, 500 + inst);
        const auto x = net.input_tensor(iq);
        const std::size_t label = inst % 3;
        const double snr = 10.0;
        const std::uint64_t seed = 77 + inst;

        auto grads = ModelParams<double>::zeros_like(net.params());
        const auto st = net.accumulate_gradients(x, label, snr, seed, grads);
        CHECK(st.loss == doctest::Approx(net.train_loss(x, label, snr, seed)).epsilon(1e-12));

        auto params = net.params().tensors();
        const auto g = std::as_const(grads).tensors();
        double worst = 0.0;
        for (std::size_t t = 0; t < params.size(); ++t) {
            for (std::size_t i = 0; i < params[t]->size(); ++i) {
                double& w = (*params[t])[i];
                const double w0 = w;
                w = w0 + 1e-5;
                const double lp = net.train_loss(x, label, snr, seed);
                w = w0 - 1e-5;
                const double lm = net.train_loss(x, label, snr, seed);
                w = w0;
                worst = std::max(worst, oracle::relative_error((*g[t])[i], (lp - lm) / 2e-5));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("forward determinism, batch invariance and permutation") {
    const auto cfg = tiny(32, 4, false);
    const CnnModel<double> net(cfg);
    std::vector<std::vector<std::complex<float>>> store;
    for (int i = 0; i < 9; ++i) store.push_back(random_iq(32, 900 + i));
    store.push_back(store[2]);  // duplicate
    std::vector<LabeledSample> samples;
    for (const auto& s : store) samples.push_back({s, 0, 0.0});

    const auto a = predict(net, samples, 1, 1);
    const auto b = predict(net, samples, 64, 3);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(std::abs(a.probabilities[i][k] - b.probabilities[i][k]) <= 1e-9);
            sum += a.probabilities[i][k];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    CHECK(a.probabilities[2] == a.probabilities[9]);
    CHECK(a.labels == b.labels);

    std::vector<LabeledSample> perm(samples.rbegin(), samples.rend());
    const auto c = predict(net, perm, 4, 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK(c.probabilities[samples.size() - 1 - i] == a.probabilities[i]);

    CHECK_THROWS_AS(net.input_tensor(random_iq(31, 1)), ShapeError);
}

TEST_CASE("early stopping bookkeeping") {
    EarlyStopping es(5, 1e-4);
    int stopped_at = 0;
    for (int epoch = 1; epoch <= 20; ++epoch) {
        es.update(0.7);
        if (es.should_stop()) {
            stopped_at = epoch;
            break;
        }
    }
    CHECK(stopped_at == 6);

    EarlyStopping small(2, 0.1);
    CHECK(small.update(1.0));
    CHECK_FALSE(small.update(0.95));  // not better by more than min_delta
    CHECK(small.update(0.85));
    CHECK(small.best() == 0.85);
    CHECK(small.counter() == 0);
    CHECK_THROWS_AS(EarlyStopping(0, 0.0), InvalidArgument);
}

TEST_CASE("training: determinism, best-epoch restore and checkpoint round trip") {
    const auto cfg = tiny(16, 3, true);
    std::vector<std::vector<std::complex<float>>> store;
    for (int i = 0; i < 24; ++i) store.push_back(random_iq(16, 300 + i));
    std::vector<LabeledSample> train_set, val_set;
    for (int i = 0; i < 24; ++i) (i < 18 ? train_set : val_set).push_back({store[i], std::size_t(i % 3), 12.0});

    TrainOptions opt;
    opt.batch_size = 5;
    opt.max_epochs = 12;
    opt.patience = 3;
    opt.adam.learning_rate = 1e-2;
    opt.seed = 9;
    opt.threads = 2;

    CnnModel<double> a(cfg), b(cfg);
    const auto sa = train(a, train_set, val_set, opt);
    opt.threads = 3;  // thread count must not change results
    const auto sb = train(b, train_set, val_set, opt);
    REQUIRE(sa.history.size() == sb.history.size());
    for (std::size_t i = 0; i < sa.history.size(); ++i) {
        CHECK(sa.history[i].train_loss == sb.history[i].train_loss);
        CHECK(sa.history[i].val_loss == sb.history[i].val_loss);
    }
    CHECK(a.params().conv[0].kernel == b.params().conv[0].kernel);

    // Restored weights reproduce the best recorded validation loss.
    double best = 1e300;
    for (const auto& r : sa.history) best = std::min(best, r.val_loss);
    CHECK(sa.best_val_loss == doctest::Approx(best));
    const auto val = summarize(predict(a, val_set), val_set);
    CHECK(val.loss == doctest::Approx(best).epsilon(1e-12));
    CHECK(sa.optimizer_steps == sa.history.size() * 4);

    // Checkpoint keeps the configuration and float32 weights.
    const auto dir = std::filesystem::temp_directory_path() / "amc_test_model";
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(a.to_checkpoint(), dir / "m.hiqw");
    const auto back = CnnModel<double>::from_checkpoint(nn::load_checkpoint(dir / "m.hiqw"));
    CHECK(back.config().input_width == 16);
    CHECK(back.config().n_classes == 3);
    CHECK(back.config().noise_layer);
    CHECK(back.config().conv_filters == cfg.conv_filters);
    for (std::size_t i = 0; i < a.params().dense[1].weight.size(); ++i)
        CHECK(back.params().dense[1].weight[i] == static_cast<double>(static_cast<float>(a.params().dense[1].weight[i])));
    std::filesystem::remove_all(dir);

    // Validation of options and labels.
    TrainOptions bad = opt;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train(a, train_set, val_set, bad), InvalidArgument);
    std::vector<LabeledSample> wrong{{store[0], 7, 0.0}};
    CHECK_THROWS_AS(train(a, wrong, val_set, opt), InvalidArgument);
    CHECK_THROWS_AS(train(a, {}, val_set, opt), InvalidArgument);
}

TEST_CASE("divergence is reported") {
    auto cfg = tiny(16, 3, false);
    CnnModel<double> net(cfg);
    std::vector<std::complex<float>> inf(16, {std::numeric_limits<float>::infinity(), 0.0f});
    std::vector<LabeledSample> train_set{{inf, 0, 0.0}};
    std::vector<LabeledSample> val_set{{inf, 0, 0.0}};
    TrainOptions opt;
    opt.max_epochs = 2;
    CHECK_THROWS_AS(train(net, train_set, val_set, opt), TrainingDivergence);
}

TEST_CASE("history table") {
    std::ostringstream os;
    write_history(os, {{1, 0.5, 0.9, 0.25, 0.5}});
    CHECK(os.str().starts_with("epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,0.5\n"));
}
