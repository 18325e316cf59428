#include "amc/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "amc/errors.hpp"
#include "amc/rng.hpp"

namespace amc::channel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> from_db(std::initializer_list<double> db) {
    std::vector<double> p;
    double total = 0.0;
    for (double d : db) {
        p.push_back(std::pow(10.0, d / 10.0));
        total += p.back();
    }
    for (double& v : p) v /= total;
    return p;
}

}  // namespace

std::string_view kind_name(ChannelKind k) {
    switch (k) {
        case ChannelKind::Ideal: return "ideal";
        case ChannelKind::Static: return "static";
        case ChannelKind::Rayleigh: return "rayleigh";
        case ChannelKind::Rician: return "rician";
        case ChannelKind::Nakagami: return "nakagami";
        case ChannelKind::UnknownUpstream: return "unknown-upstream";
    }
    throw InvalidArgument("unknown channel kind id " + std::to_string(static_cast<int>(k)));
}

ChannelKind parse_kind(std::string_view name) {
    for (auto k : kSimulatedKinds)
        if (kind_name(k) == name) return k;
    if (name == kind_name(ChannelKind::UnknownUpstream)) return ChannelKind::UnknownUpstream;
    throw InvalidArgument("unknown channel kind '" + std::string(name) + "'");
}

ChannelKind kind_from_id(std::uint8_t id) {
    if (id <= 4 || id == 255) return static_cast<ChannelKind>(id);
    throw InvalidArgument("unknown channel kind id " + std::to_string(id));
}

bool is_fading(ChannelKind k) {
    return k == ChannelKind::Rayleigh || k == ChannelKind::Rician || k == ChannelKind::Nakagami;
}

void ChannelSpec::validate() const {
    if (!(rician_k > 0.0)) throw InvalidArgument("rician k must be positive");
    if (!(nakagami_m >= 0.5)) throw InvalidArgument("nakagami m must be at least 0.5");
    if (kind == ChannelKind::UnknownUpstream) throw InvalidArgument("cannot simulate an unknown-upstream channel");
    if (is_fading(kind) && n_taps != 4 && n_taps != 6)
        throw InvalidArgument("fading channels use 4 or 6 taps, got " + std::to_string(n_taps));
}

std::vector<double> profile_for(unsigned n_taps) {
    switch (n_taps) {
        case 4: return from_db({0.0, -9.7, -19.2, -22.8});
        case 6: return from_db({0.0, -1.0, -9.0, -10.0, -15.0, -20.0});
        default: throw InvalidArgument("no delay profile for " + std::to_string(n_taps) + " taps");
    }
}

ChannelRealization draw_channel(const ChannelSpec& spec) {
    spec.validate();
    ChannelRealization ch;
    ch.kind = spec.kind;
    ch.seed = spec.seed;
    auto eng = make_engine(spec.seed);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::normal_distribution<double> gauss(0.0, 1.0);

    switch (spec.kind) {
        case ChannelKind::Ideal:
            ch.taps = {cplx(1.0, 0.0)};
            ch.profile_powers = {1.0};
            return ch;
        case ChannelKind::Static:
            ch.taps = {std::polar(1.0, phase(eng))};
            ch.profile_powers = {1.0};
            return ch;
        default:
            break;
    }

    ch.profile_powers = profile_for(spec.n_taps);
    ch.taps.resize(spec.n_taps);
    auto diffuse = [&](double power) {
        const double s = std::sqrt(power / 2.0);
        const double re = gauss(eng);
        const double im = gauss(eng);
        return cplx(s * re, s * im);
    };
    for (unsigned k = 0; k < spec.n_taps; ++k) {
        const double p = ch.profile_powers[k];
        switch (spec.kind) {
            case ChannelKind::Rayleigh:
                ch.taps[k] = diffuse(p);
                break;
            case ChannelKind::Rician:
                if (k == 0) {
                    const double kf = spec.rician_k;
                    const cplx los = std::polar(std::sqrt(p * kf / (kf + 1.0)), phase(eng));
                    ch.taps[k] = los + diffuse(p / (kf + 1.0));
                } else {
                    ch.taps[k] = diffuse(p);
                }
                break;
            case ChannelKind::Nakagami: {
                const double m = spec.nakagami_m;
                std::gamma_distribution<double> power(m, p / m);
                const double amp = std::sqrt(power(eng));
                ch.taps[k] = std::polar(amp, phase(eng));
                break;
            }
            default:
                break;
        }
    }
    return ch;
}

dsp::Waveform apply_channel(const dsp::Waveform& in, const ChannelRealization& ch) {
    if (ch.taps.empty()) throw InvalidArgument("apply_channel: empty tap vector");
    if (in.size() < ch.taps.size())
        throw InvalidArgument("apply_channel: waveform shorter than the channel");
    dsp::Waveform out;
    out.gain = in.gain;
    out.samples.assign(in.size(), cplx{});
    for (std::size_t n = 0; n < in.size(); ++n) {
        cplx acc{};
        const std::size_t kmax = std::min(ch.taps.size() - 1, n);
        for (std::size_t k = 0; k <= kmax; ++k) acc += ch.taps[k] * in.samples[n - k];
        out.samples[n] = acc;
    }
    return out;
}

std::vector<cplx> awgn_noise(std::span<const cplx> in, double snr_db, std::uint64_t seed) {
    std::vector<cplx> noise(in.size());
    if (std::isinf(snr_db) && snr_db > 0) return noise;
    const double p = dsp::mean_power(in);
    if (!(p > 0.0)) throw DegenerateSignal("add_awgn: input has zero power");
    const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : noise) {
        const double re = gauss(eng);
        const double im = gauss(eng);
        v = cplx(sigma * re, sigma * im);
    }
    return noise;
}

dsp::Waveform add_awgn(const dsp::Waveform& in, double snr_db, std::uint64_t seed) {
    const auto noise = awgn_noise(in.samples, snr_db, seed);
    dsp::Waveform out = in;
    for (std::size_t i = 0; i < noise.size(); ++i) out.samples[i] += noise[i];
    return out;
}

}  // namespace amc::channel
