#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "amc/errors.hpp"
#include "amc/nn/adam.hpp"
#include "amc/nn/checkpoint.hpp"
#include "amc/nn/layers.hpp"
#include "amc/rng.hpp"
#include "oracles.hpp"

using namespace amc;
using namespace amc::nn;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed, double scale = 1.0) {
    Tensor<double> t(std::move(s));
    auto eng = make_engine(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : t.values()) v = g(eng);
    return t;
}

// sum(w .* f(x)) with fixed random weights w turns any layer into a scalar
// loss whose gradient w.r.t. the output is exactly w.
double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
    return s;
}

// Compares an analytic gradient with central differences on every entry.
void check_gradient(const std::function<double(const Tensor<double>&)>& f, const Tensor<double>& x,
                    const Tensor<double>& analytic, double tol = 1e-4) {
    REQUIRE(analytic.shape() == x.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor<double> xp = x, xm = x;
        xp[i] += 1e-5;
        xm[i] -= 1e-5;
        const double num = (f(xp) - f(xm)) / 2e-5;
        worst = std::max(worst, oracle::relative_error(analytic[i], num));
    }
    CHECK(worst < tol);
}

// Naive "same" cross-correlation used as the forward oracle.
Tensor<double> naive_conv(const Tensor<double>& x, const ConvParams<double>& p) {
    const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2), kh = p.kernel_h(), kw = p.kernel_w(),
                      Co = p.out_channels();
    Tensor<double> y({H, W, Co});
    const long pt = long(kh - 1) / 2, pl = long(kw - 1) / 2;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t o = 0; o < Co; ++o) {
                double acc = p.bias[o];
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j) {
                        const long ih = long(h + i) - pt, iw = long(w + j) - pl;
                        if (ih < 0 || iw < 0 || ih >= long(H) || iw >= long(W)) continue;
                        for (std::size_t c = 0; c < C; ++c)
                            acc += x.at(std::size_t(ih), std::size_t(iw), c) *
                                   p.kernel[((i * kw + j) * C + c) * Co + o];
                    }
                y.at(h, w, o) = acc;
            }
    return y;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor<double> t({2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.at(1, 2, 3) == 1.5);
    CHECK(shape_string(t.shape()) == "2x3x4");
    CHECK_THROWS_AS(Tensor<double>({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>(3)), ShapeError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
    CHECK(t.reshaped({24}).shape() == Shape{24});
}

TEST_CASE("conv2d forward") {
    // 1x1 identity kernel is the identity map.
    auto x = random_tensor({2, 7, 3}, 1);
    auto id = ConvParams<double>::zeros(1, 1, 3, 3);
    for (std::size_t c = 0; c < 3; ++c) id.kernel[c * 3 + c] = 1.0;
    CHECK(conv2d(x, id) == x);

    for (auto [kh, kw] : {std::pair<std::size_t, std::size_t>{2, 3}, {3, 3}, {1, 4}, {2, 2}}) {
        CAPTURE(kh);
        CAPTURE(kw);
        ConvParams<double> p{random_tensor({kh, kw, 3, 4}, 2), random_tensor({4}, 3)};
        const auto y = conv2d(x, p);
        const auto ref = naive_conv(x, p);
        REQUIRE(y.shape() == ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-12);
    }

    auto conv1 = ConvParams<float>::zeros(2, 3, 1, 256);
    CHECK(conv2d(Tensor<float>({2, 1024, 1}), conv1).shape() == Shape{2, 1024, 256});
    CHECK_THROWS_AS(conv2d(Tensor<float>({2, 1024, 2}), conv1), ShapeError);
}

TEST_CASE("conv2d gradients against finite differences") {
    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        const auto x = random_tensor({2, 8, 3}, 10 + inst);
        ConvParams<double> p{random_tensor({2, 3, 3, 4}, 20 + inst), random_tensor({4}, 30 + inst)};
        const auto w = random_tensor({2, 8, 4}, 40 + inst);
        auto g = ConvParams<double>::zeros(2, 3, 3, 4);
        Tensor<double> gx;
        conv2d_backward(x, p, w, &gx, g);

        check_gradient([&](const Tensor<double>& xi) { return weighted_sum(conv2d(xi, p), w); }, x, gx);
        check_gradient(
            [&](const Tensor<double>& k) { return weighted_sum(conv2d(x, ConvParams<double>{k, p.bias}), w); },
            p.kernel, g.kernel);
        check_gradient(
            [&](const Tensor<double>& b) { return weighted_sum(conv2d(x, ConvParams<double>{p.kernel, b}), w); },
            p.bias, g.bias);

        // Backward accumulates.
        conv2d_backward<double>(x, p, w, nullptr, g);
        auto once = ConvParams<double>::zeros(2, 3, 3, 4);
        conv2d_backward<double>(x, p, w, nullptr, once);
        for (std::size_t i = 0; i < g.kernel.size(); ++i) CHECK(g.kernel[i] == doctest::Approx(2 * once.kernel[i]));
    }
}

TEST_CASE("maxpool") {
    Tensor<double> x({1, 4, 1}, std::vector<double>{1, 3, 2, 2});
    const auto y = maxpool(x);
    CHECK(y.shape() == Shape{1, 2, 1});
    CHECK(y[0] == 3);
    CHECK(y[1] == 2);

    const auto g = maxpool_backward(x, Tensor<double>({1, 2, 1}, std::vector<double>{5, 7}));
    CHECK(g.values()[0] == 0);
    CHECK(g.values()[1] == 5);
    CHECK(g.values()[2] == 7);  // tie: first element of the window
    CHECK(g.values()[3] == 0);

    CHECK(maxpool(Tensor<float>({2, 1024, 256})).shape() == Shape{2, 512, 256});
    CHECK_THROWS_AS(maxpool(Tensor<float>({2, 5, 1})), ShapeError);

    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        const auto xi = random_tensor({2, 8, 3}, 50 + inst);
        const auto w = random_tensor({2, 4, 3}, 60 + inst);
        check_gradient([&](const Tensor<double>& t) { return weighted_sum(maxpool(t), w); }, xi,
                       maxpool_backward(xi, w));
    }
}

TEST_CASE("relu") {
    Tensor<double> x({3}, std::vector<double>{-1, 0, 2});
    const auto y = relu(x);
    CHECK(y.values()[0] == 0);
    CHECK(y.values()[1] == 0);
    CHECK(y.values()[2] == 2);
    CHECK(relu(y) == y);
    const auto g = relu_backward(x, Tensor<double>({3}, std::vector<double>{1, 1, 1}));
    CHECK(g.values()[0] == 0);
    CHECK(g.values()[1] == 0);
    CHECK(g.values()[2] == 1);
    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        const auto xi = random_tensor({4, 5, 2}, 70 + inst);
        const auto w = random_tensor({4, 5, 2}, 80 + inst);
        check_gradient([&](const Tensor<double>& t) { return weighted_sum(relu(t), w); }, xi, relu_backward(xi, w));
    }
}

TEST_CASE("dropout") {
    const auto x = random_tensor({3, 4, 5}, 90);
    CHECK(dropout(x, 0.5, Mode::Eval, 1) == x);
    CHECK(dropout(x, 0.0, Mode::Train, 1) == x);
    CHECK(dropout(x, 0.0, Mode::Eval, 1) == x);
    CHECK(dropout(x, 0.5, Mode::Train, 7) == dropout(x, 0.5, Mode::Train, 7));
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::Train, 1), InvalidArgument);

    const std::size_t n = 100'000;
    const auto mask = dropout_mask<double>(n, 0.5, 3);
    std::size_t kept = 0;
    for (double m : mask) {
        CHECK((m == 0.0 || m == 2.0));
        kept += m != 0.0;
    }
    const double frac = double(kept) / n;
    CHECK(frac >= 0.49);
    CHECK(frac <= 0.51);

    const auto w = random_tensor({3, 4, 5}, 91);
    check_gradient([&](const Tensor<double>& t) { return weighted_sum(dropout(t, 0.3, Mode::Train, 5), w); }, x,
                   dropout_backward(w, 0.3, Mode::Train, 5));
}

TEST_CASE("dense") {
    DenseParams<double> id = DenseParams<double>::zeros(4, 4);
    for (std::size_t i = 0; i < 4; ++i) id.weight[i * 4 + i] = 1.0;
    const auto x = random_tensor({4}, 100);
    CHECK(dense(x, id) == x);
    CHECK(dense(Tensor<float>({8192}), DenseParams<float>::zeros(8192, 128)).shape() == Shape{128});
    CHECK_THROWS_AS(dense(Tensor<float>({10}), DenseParams<float>::zeros(8192, 128)), ShapeError);

    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        const auto xi = random_tensor({7}, 110 + inst);
        DenseParams<double> p{random_tensor({3, 7}, 120 + inst), random_tensor({3}, 130 + inst)};
        const auto w = random_tensor({3}, 140 + inst);
        auto g = DenseParams<double>::zeros(7, 3);
        Tensor<double> gx;
        dense_backward(xi, p, w, &gx, g);
        check_gradient([&](const Tensor<double>& t) { return weighted_sum(dense(t, p), w); }, xi, gx);
        check_gradient([&](const Tensor<double>& t) { return weighted_sum(dense(xi, DenseParams<double>{t, p.bias}), w); },
                       p.weight, g.weight);
        check_gradient([&](const Tensor<double>& t) { return weighted_sum(dense(xi, DenseParams<double>{p.weight, t}), w); },
                       p.bias, g.bias);
    }
}

TEST_CASE("softmax and cross-entropy") {
    auto p = softmax<double>(std::vector<double>{0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5));
    p = softmax<double>(std::vector<double>{std::log(2.0), 0.0});
    CHECK(std::abs(p[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(p[1] - 1.0 / 3.0) < 1e-15);

    auto eng = make_engine(5);
    std::normal_distribution<double> g(0.0, 10.0);
    for (int inst = 0; inst < 50; ++inst) {
        std::vector<double> y(6);
        for (auto& v : y) v = g(eng);
        const auto a = softmax<double>(y);
        std::vector<double> shifted = y;
        for (auto& v : shifted) v += 123.25;
        const auto b = softmax<double>(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-12);
            CHECK(a[i] >= 0.0);
            sum += a[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
        CHECK(std::max_element(a.begin(), a.end()) - a.begin() == std::max_element(y.begin(), y.end()) - y.begin());
    }
    const auto big = softmax<float>(std::vector<float>{1e30f, -1e30f, 0.0f});
    CHECK(big[0] == 1.0f);
    CHECK_THROWS_AS(softmax<double>(std::vector<double>{0.0, std::nan("")}), InvalidArgument);

    CHECK(cross_entropy<double>(std::vector<double>{0.0, 1.0, 0.0}, 1) == 0.0);
    CHECK(cross_entropy<double>(std::vector<double>(5, 0.2), 3) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    CHECK(std::isfinite(cross_entropy<double>(std::vector<double>{1.0, 0.0}, 1)));
    CHECK_THROWS_AS(cross_entropy<double>(std::vector<double>{1.0}, 1), InvalidArgument);

    // Combined gradient: numeric derivative of CE(softmax(y)) vs p - onehot.
    for (int inst = 0; inst < 5; ++inst) {
        std::vector<double> y(5);
        std::normal_distribution<double> u(0.0, 1.0);
        for (auto& v : y) v = u(eng);
        const std::size_t label = std::size_t(inst) % 5;
        const auto probs = softmax<double>(y);
        const auto grad = softmax_cross_entropy_grad<double>(probs, label);
        for (std::size_t i = 0; i < 5; ++i) {
            const double expect = probs[i] - (i == label ? 1.0 : 0.0);
            CHECK(std::abs(grad[i] - expect) <= 1e-12);
            const double num = oracle::central_difference(
                [&](std::span<const double> v) {
                    return cross_entropy<double>(softmax<double>(std::vector<double>(v.begin(), v.end())), label);
                },
                y, i);
            CHECK(oracle::relative_error(grad[i], num) < 1e-6);
        }
    }
}

TEST_CASE("gaussian noise layer") {
    const auto x = random_tensor({2, 1024, 1}, 200);
    CHECK(gaussian_noise_layer(x, 0.0, Mode::Eval, 1) == x);
    const auto a = gaussian_noise_layer(x, 3.0, Mode::Train, 1);
    const auto b = gaussian_noise_layer(x, 3.0, Mode::Train, 2);
    CHECK(a != b);
    CHECK(a == gaussian_noise_layer(x, 3.0, Mode::Train, 1));

    // Added noise power over 1e5 elements, for several SNRs.
    const auto big = random_tensor({2, 50'000, 1}, 201, 0.7);
    double px = 0.0;
    for (double v : big.values()) px += v * v;
    px /= double(big.size());
    for (double snr : {-10.0, 0.0, 6.0, 18.0}) {
        const auto y = gaussian_noise_layer(big, snr, Mode::Train, 9);
        double pn = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) pn += (y[i] - big[i]) * (y[i] - big[i]);
        pn /= double(y.size());
        CHECK(std::abs(oracle::db(px / pn) - snr) < 0.3);
    }
    CHECK_THROWS_AS(gaussian_noise_layer(Tensor<double>({2, 4, 1}), 0.0, Mode::Train, 1), DegenerateSignal);
}

TEST_CASE("ADAM") {
    AdamConfig cfg;
    {
        Adam<double> adam(cfg);
        Tensor<double> theta({1}, 0.5), grad({1}, 1.0);
        std::vector<Tensor<double>*> p{&theta};
        std::vector<const Tensor<double>*> g{&grad};
        adam.step(p, g);
        CHECK(std::abs((theta[0] - 0.5) - (-cfg.learning_rate / (1.0 + cfg.epsilon))) < 1e-15);
        CHECK(adam.steps() == 1);
    }
    {
        Adam<double> adam(cfg);
        Tensor<double> theta({3}, std::vector<double>{1, -2, 3}), grad({3}, 0.0);
        const auto before = theta;
        std::vector<Tensor<double>*> p{&theta};
        std::vector<const Tensor<double>*> g{&grad};
        adam.step(p, g);
        CHECK(theta == before);
    }
    {
        // Oracle: the same recurrence written out for a scalar.
        AdamConfig c;
        c.learning_rate = 0.1;
        Adam<double> adam(c);
        Tensor<double> theta({1}, 1.0), grad({1});
        std::vector<Tensor<double>*> p{&theta};
        std::vector<const Tensor<double>*> g{&grad};
        double th = 1.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 200; ++t) {
            grad[0] = 2.0 * theta[0];
            adam.step(p, g);
            const double gg = 2.0 * th;
            m = 0.9 * m + 0.1 * gg;
            v = 0.999 * v + 0.001 * gg * gg;
            th -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        }
        CHECK(std::abs(theta[0] - th) < 1e-12);
        CHECK(std::abs(theta[0]) < 0.05);
    }
    {
        Adam<double> adam(cfg);
        Tensor<double> theta({2}, 1.0), grad({2}, std::vector<double>{1.0, std::nan("")});
        std::vector<Tensor<double>*> p{&theta};
        std::vector<const Tensor<double>*> g{&grad};
        CHECK_THROWS_AS(adam.step(p, g), TrainingDivergence);
        CHECK(theta[0] == 1.0);
        Tensor<double> wrong({3});
        std::vector<const Tensor<double>*> gw{&wrong};
        CHECK_THROWS_AS(adam.step(p, gw), ShapeError);
    }
    AdamConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(Adam<double>{bad}, InvalidArgument);
}

TEST_CASE("checkpoint round trip and corruption") {
    const auto dir = std::filesystem::temp_directory_path() / "amc_test_nn";
    std::filesystem::create_directories(dir);
    const auto path = dir / "w.hiqw";
    std::vector<NamedTensor> entries{{"a", Tensor<float>({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6})},
                                     {"bias", Tensor<float>({1}, std::vector<float>{-0.5f})}};
    save_checkpoint(entries, path);
    const auto back = load_checkpoint(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "a");
    CHECK(back[0].tensor == entries[0].tensor);
    CHECK(back[1].tensor == entries[1].tensor);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    try {
        load_checkpoint(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
    }
    std::filesystem::resize_file(path, 10);
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.hiqw"), IoError);
    std::filesystem::remove_all(dir);
}
