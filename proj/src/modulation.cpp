#include "amc/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "amc/errors.hpp"
#include "amc/rng.hpp"

namespace amc::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

struct VariantInfo {
    Variant variant;
    std::string_view name;
    Family family;
    unsigned order;
};

constexpr std::array<VariantInfo, kVariantCount> kVariants{{
    {Variant::AM_DSB, "AM-DSB", Family::Analog, 1},
    {Variant::AM_SC, "AM-SC", Family::Analog, 1},
    {Variant::AM_USB, "AM-USB", Family::Analog, 1},
    {Variant::AM_LSB, "AM-LSB", Family::Analog, 1},
    {Variant::FM, "FM", Family::Analog, 1},
    {Variant::PM, "PM", Family::Analog, 1},
    {Variant::FSK2, "2-FSK", Family::FSK, 2},
    {Variant::FSK4, "4-FSK", Family::FSK, 4},
    {Variant::FSK8, "8-FSK", Family::FSK, 8},
    {Variant::FSK16, "16-FSK", Family::FSK, 16},
    {Variant::PAM4, "4-PAM", Family::PAM, 4},
    {Variant::PAM8, "8-PAM", Family::PAM, 8},
    {Variant::PAM16, "16-PAM", Family::PAM, 16},
    {Variant::BPSK, "BPSK", Family::PSK, 2},
    {Variant::QPSK, "QPSK", Family::PSK, 4},
    {Variant::PSK8, "8-PSK", Family::PSK, 8},
    {Variant::PSK16, "16-PSK", Family::PSK, 16},
    {Variant::PSK32, "32-PSK", Family::PSK, 32},
    {Variant::PSK64, "64-PSK", Family::PSK, 64},
    {Variant::QAM4, "4-QAM", Family::QAM, 4},
    {Variant::QAM8, "8-QAM", Family::QAM, 8},
    {Variant::QAM16, "16-QAM", Family::QAM, 16},
    {Variant::QAM32, "32-QAM", Family::QAM, 32},
    {Variant::QAM64, "64-QAM", Family::QAM, 64},
    {Variant::QAM128, "128-QAM", Family::QAM, 128},
    {Variant::QAM256, "256-QAM", Family::QAM, 256},
}};

const VariantInfo& info(Variant v) {
    auto idx = static_cast<std::size_t>(v);
    if (idx >= kVariants.size()) throw InvalidArgument("unknown modulation id " + std::to_string(idx));
    return kVariants[idx];
}

constexpr unsigned gray(unsigned i) { return i ^ (i >> 1); }

unsigned log2u(unsigned m) {
    unsigned k = 0;
    while ((1u << k) < m) ++k;
    return k;
}

unsigned bits_to_label(std::span<const std::uint8_t> bits) {
    unsigned label = 0;
    for (auto b : bits) label = (label << 1) | (b & 1u);
    return label;
}

void append_label(std::vector<std::uint8_t>& out, unsigned label, unsigned nbits) {
    for (unsigned b = nbits; b-- > 0;) out.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
}

void require_linear(const ModulationSpec& spec, const char* op) {
    if (!spec.is_linear())
        throw WrongFamily(std::string(op) + ": " + std::string(variant_name(spec.variant)) +
                          " is not a linear (PAM/PSK/QAM) modulation");
}

std::vector<cplx> qam_points(unsigned order) {
    const unsigned k = log2u(order);
    const unsigned kq = k / 2;
    const unsigned ki = k - kq;
    const unsigned ni = 1u << ki;
    const unsigned nq = 1u << kq;
    const bool cross = (k % 2 == 1) && order > 8;
    const int side = static_cast<int>(ni * 3 / 4);
    const int shift = static_cast<int>(ni) - side;

    std::vector<cplx> pts(order);
    for (unsigned ii = 0; ii < ni; ++ii) {
        for (unsigned iq = 0; iq < nq; ++iq) {
            int re = static_cast<int>(ni) - 1 - 2 * static_cast<int>(ii);
            int im = static_cast<int>(nq) - 1 - 2 * static_cast<int>(iq);
            if (cross && std::abs(re) > side - 1) {
                // Fold the outer rectangle columns onto the top/bottom arms.
                const int sre = re > 0 ? 1 : -1;
                const int sim = im > 0 ? 1 : -1;
                const int new_im = sim * (std::abs(re) - shift);
                const int new_re = sre * (static_cast<int>(nq) - std::abs(im));
                re = new_re;
                im = new_im;
            }
            const unsigned label = (gray(ii) << kq) | gray(iq);
            pts[label] = cplx(re, im);
        }
    }
    return pts;
}

}  // namespace

std::string_view family_name(Family f) {
    switch (f) {
        case Family::Analog: return "Analog";
        case Family::FSK: return "FSK";
        case Family::PAM: return "PAM";
        case Family::PSK: return "PSK";
        case Family::QAM: return "QAM";
    }
    throw InvalidArgument("unknown family id " + std::to_string(static_cast<int>(f)));
}

const std::array<Variant, kVariantCount>& all_variants() {
    static const std::array<Variant, kVariantCount> list = [] {
        std::array<Variant, kVariantCount> a{};
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = kVariants[i].variant;
        return a;
    }();
    return list;
}

std::string_view variant_name(Variant v) { return info(v).name; }

Variant parse_variant(std::string_view name) {
    for (const auto& vi : kVariants)
        if (vi.name == name) return vi.variant;
    throw InvalidArgument("unknown modulation type '" + std::string(name) + "'");
}

Variant variant_from_id(std::uint16_t id) { return info(static_cast<Variant>(id)).variant; }

Family family_of(Variant v) { return info(v).family; }

ModulationSpec ModulationSpec::of(Variant v) {
    const auto& vi = info(v);
    return {vi.variant, vi.family, vi.order, vi.order > 1 ? log2u(vi.order) : 0u};
}

void ShapingConfig::validate() const {
    if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw InvalidArgument("roll-off must lie in [0, 1]");
    if (oversampling < 2) throw InvalidArgument("oversampling must be at least 2");
    if (span < 1) throw InvalidArgument("filter span must be at least 1 symbol");
}

double mean_power(std::span<const cplx> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : x) acc += std::norm(s);
    return acc / static_cast<double>(x.size());
}

std::vector<std::uint8_t> generate_bits(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw InvalidArgument("generate_bits: count must be positive");
    auto eng = make_engine(seed);
    std::vector<std::uint8_t> bits(count);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 64 == 0) word = eng();
        bits[i] = static_cast<std::uint8_t>(word & 1u);
        word >>= 1;
    }
    return bits;
}

std::vector<cplx> constellation(const ModulationSpec& spec) {
    require_linear(spec, "constellation");
    const unsigned m = spec.order;
    std::vector<cplx> pts(m);
    switch (spec.family) {
        case Family::PAM:
            for (unsigned i = 0; i < m; ++i)
                pts[gray(i)] = cplx(static_cast<double>(m) - 1.0 - 2.0 * i, 0.0);
            break;
        case Family::PSK:
            for (unsigned i = 0; i < m; ++i) pts[gray(i)] = std::polar(1.0, 2.0 * kPi * i / m);
            break;
        case Family::QAM:
            pts = qam_points(m);
            break;
        default:
            break;
    }
    const double scale = 1.0 / std::sqrt(mean_power(pts));
    for (auto& p : pts) p *= scale;
    // Exact zeros keep the PSK points on the axes free of cos(pi/2) residue.
    for (auto& p : pts) {
        if (std::abs(p.real()) < 1e-15) p.real(0.0);
        if (std::abs(p.imag()) < 1e-15) p.imag(0.0);
    }
    return pts;
}

std::vector<cplx> map_symbols(std::span<const std::uint8_t> bits, const ModulationSpec& spec) {
    require_linear(spec, "map_symbols");
    const unsigned k = spec.bits_per_symbol;
    if (bits.size() % k != 0)
        throw InvalidArgument("map_symbols: " + std::to_string(bits.size()) + " bits is not a multiple of " +
                              std::to_string(k));
    const auto pts = constellation(spec);
    std::vector<cplx> out(bits.size() / k);
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = pts[bits_to_label(bits.subspan(s * k, k))];
    return out;
}

std::vector<std::uint8_t> demap_symbols(std::span<const cplx> symbols, const ModulationSpec& spec) {
    require_linear(spec, "demap_symbols");
    if (symbols.empty()) throw InvalidArgument("demap_symbols: empty input");
    const auto pts = constellation(spec);
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols.size() * spec.bits_per_symbol);
    for (const auto& s : symbols) {
        unsigned best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (unsigned i = 0; i < pts.size(); ++i) {
            const double d = std::norm(s - pts[i]);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        append_label(bits, best, spec.bits_per_symbol);
    }
    return bits;
}

double raised_cosine(double t, double rolloff) {
    if (t == 0.0) return 1.0;
    const double sinc = std::sin(kPi * t) / (kPi * t);
    if (rolloff > 0.0 && std::abs(std::abs(2.0 * rolloff * t) - 1.0) < 1e-12)
        return kPi / 4.0 * std::sin(kPi / (2.0 * rolloff)) / (kPi / (2.0 * rolloff));
    const double x = 2.0 * rolloff * t;
    return sinc * std::cos(kPi * rolloff * t) / (1.0 - x * x);
}

std::vector<double> raised_cosine_taps(const ShapingConfig& shaping) {
    shaping.validate();
    const int half = static_cast<int>(shaping.span * shaping.oversampling);
    std::vector<double> taps(2 * half + 1);
    for (int n = -half; n <= half; ++n) {
        // Integer multiples of the symbol period are exact Nyquist zeros.
        if (n != 0 && n % static_cast<int>(shaping.oversampling) == 0) {
            taps[n + half] = 0.0;
            continue;
        }
        taps[n + half] = raised_cosine(static_cast<double>(n) / shaping.oversampling, shaping.rolloff);
    }
    return taps;
}

SymbolWindow visible_symbols(const ShapingConfig& shaping, std::size_t n_samples) {
    const std::size_t sps = shaping.oversampling;
    return {shaping.span, (n_samples + sps - 1) / sps};
}

std::size_t bits_required(const ModulationSpec& spec, const ShapingConfig& shaping, std::size_t n_samples) {
    const std::size_t sps = shaping.oversampling;
    const std::size_t symbols = (n_samples + sps - 1) / sps;
    switch (spec.family) {
        case Family::PAM:
        case Family::PSK:
        case Family::QAM:
            return (symbols + 2 * shaping.span) * spec.bits_per_symbol;
        case Family::FSK:
            return symbols * spec.bits_per_symbol;
        case Family::Analog:
            break;
    }
    throw WrongFamily("bits_required: analog modulations carry no bits");
}

Waveform modulate_linear(std::span<const std::uint8_t> bits, const ModulationSpec& spec,
                         const ShapingConfig& shaping, std::size_t n_samples) {
    require_linear(spec, "modulate_linear");
    shaping.validate();
    if (n_samples == 0) throw InvalidArgument("modulate_linear: n_samples must be positive");
    const std::size_t need = bits_required(spec, shaping, n_samples);
    if (bits.size() < need)
        throw InvalidArgument("modulate_linear: need " + std::to_string(need) + " bits, got " +
                              std::to_string(bits.size()));

    const auto symbols = map_symbols(bits.first(need), spec);
    const auto taps = raised_cosine_taps(shaping);
    const std::size_t sps = shaping.oversampling;
    const std::size_t delay = taps.size() - 1;  // first fully-overlapped output

    Waveform w;
    w.samples.assign(n_samples, cplx{});
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::size_t m = i + delay;
        // Symbols k with 0 <= m - k*sps < taps.size().
        const std::size_t k_hi = std::min(m / sps, symbols.size() - 1);
        const std::size_t k_lo = m >= delay ? (m - delay + sps - 1) / sps : 0;
        cplx acc{};
        for (std::size_t k = k_lo; k <= k_hi; ++k) acc += symbols[k] * taps[m - k * sps];
        w.samples[i] = acc;
    }
    return normalize_power(std::move(w));
}

std::vector<std::uint8_t> demodulate_linear(const Waveform& wave, const ModulationSpec& spec,
                                            const ShapingConfig& shaping) {
    require_linear(spec, "demodulate_linear");
    const auto win = visible_symbols(shaping, wave.size());
    std::vector<cplx> symbols(win.count);
    for (std::size_t j = 0; j < win.count; ++j) symbols[j] = wave.samples[j * shaping.oversampling] / wave.gain;
    return demap_symbols(symbols, spec);
}

double fsk_tone(unsigned k, unsigned order) {
    return (2.0 * k - order + 1.0) / (4.0 * order);
}

Waveform modulate_fsk(std::span<const std::uint8_t> bits, const ModulationSpec& spec,
                      const ShapingConfig& shaping, std::size_t n_samples) {
    if (spec.family != Family::FSK)
        throw WrongFamily("modulate_fsk: " + std::string(variant_name(spec.variant)) + " is not FSK");
    shaping.validate();
    if (n_samples == 0) throw InvalidArgument("modulate_fsk: n_samples must be positive");
    const std::size_t need = bits_required(spec, shaping, n_samples);
    if (bits.size() < need)
        throw InvalidArgument("modulate_fsk: need " + std::to_string(need) + " bits, got " +
                              std::to_string(bits.size()));

    const unsigned k = spec.bits_per_symbol;
    const std::size_t sps = shaping.oversampling;
    Waveform w;
    w.samples.resize(n_samples);
    double phase = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::size_t sym = n / sps;
        // Gray labels: bits encode gray(tone index).
        unsigned label = bits_to_label(bits.subspan(sym * k, k));
        unsigned tone = label;
        for (unsigned s = 1; s < 32; s <<= 1) tone ^= tone >> s;
        w.samples[n] = std::polar(1.0, phase);
        phase = std::fmod(phase + 2.0 * kPi * fsk_tone(tone, spec.order), 2.0 * kPi);
    }
    return normalize_power(std::move(w));
}

std::vector<std::uint8_t> demodulate_fsk(const Waveform& wave, const ModulationSpec& spec,
                                         const ShapingConfig& shaping) {
    if (spec.family != Family::FSK)
        throw WrongFamily("demodulate_fsk: " + std::string(variant_name(spec.variant)) + " is not FSK");
    const std::size_t sps = shaping.oversampling;
    const std::size_t symbols = wave.size() / sps;
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols * spec.bits_per_symbol);
    const double m = spec.order;
    for (std::size_t j = 0; j < symbols; ++j) {
        const std::size_t n = j * sps;
        const double dphi = std::arg(wave.samples[n + 1] * std::conj(wave.samples[n]));
        const double f = dphi / (2.0 * kPi);
        long tone = std::lround((f * 4.0 * m + m - 1.0) / 2.0);
        tone = std::clamp(tone, 0L, static_cast<long>(spec.order) - 1);
        append_label(bits, gray(static_cast<unsigned>(tone)), spec.bits_per_symbol);
    }
    return bits;
}

std::vector<double> make_message(std::size_t n_samples, std::uint64_t seed) {
    if (n_samples == 0) throw InvalidArgument("make_message: n_samples must be positive");
    constexpr int half = 32;
    constexpr double cutoff = 1.0 / 8.0;  // cycles per sample
    std::vector<double> h(2 * half + 1);
    for (int k = -half; k <= half; ++k) {
        const double x = 2.0 * cutoff * k;
        const double sinc = k == 0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
        const double blackman = 0.42 + 0.5 * std::cos(kPi * k / half) + 0.08 * std::cos(2.0 * kPi * k / half);
        h[k + half] = 2.0 * cutoff * sinc * blackman;
    }

    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> white(n_samples + h.size() - 1);
    for (auto& v : white) v = gauss(eng);

    std::vector<double> msg(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * white[i + k];
        msg[i] = acc;
    }
    double mean = 0.0;
    for (double v : msg) mean += v;
    mean /= static_cast<double>(n_samples);
    double var = 0.0;
    for (double& v : msg) {
        v -= mean;
        var += v * v;
    }
    var /= static_cast<double>(n_samples);
    if (var > 0.0) {
        const double inv = 1.0 / std::sqrt(var);
        for (double& v : msg) v *= inv;
    }
    return msg;
}

std::vector<double> hilbert(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    Eigen::FFT<double> fft;
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> spec;
    fft.fwd(spec, in);
    // Analytic-signal weights: keep DC (and Nyquist for even n), double the
    // positive half, zero the negative half.
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n)
            spec[k] *= 2.0;
        else if (2 * k > n)
            spec[k] = 0.0;
    }
    std::vector<cplx> analytic;
    fft.inv(analytic, spec);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = analytic[i].imag();
    return out;
}

std::vector<cplx> analog_baseband(std::span<const double> message, Variant variant, const AnalogParams& params) {
    if (family_of(variant) != Family::Analog)
        throw WrongFamily("modulate_analog: " + std::string(variant_name(variant)) + " is not analog");
    const std::size_t n = message.size();
    std::vector<cplx> x(n);
    switch (variant) {
        case Variant::AM_DSB:
            for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + params.am_depth * message[i];
            break;
        case Variant::AM_SC:
            for (std::size_t i = 0; i < n; ++i) x[i] = message[i];
            break;
        case Variant::AM_USB:
        case Variant::AM_LSB: {
            const auto q = hilbert(message);
            const double sign = variant == Variant::AM_USB ? 1.0 : -1.0;
            for (std::size_t i = 0; i < n; ++i) x[i] = cplx(message[i], sign * q[i]);
            break;
        }
        case Variant::FM: {
            double phase = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                phase = std::fmod(phase + 2.0 * kPi * params.fm_sensitivity * message[i], 2.0 * kPi);
                x[i] = std::polar(1.0, phase);
            }
            break;
        }
        case Variant::PM:
            for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(1.0, params.pm_sensitivity * message[i]);
            break;
        default:
            break;
    }
    return x;
}

Waveform modulate_analog(std::span<const double> message, Variant variant, std::size_t n_samples,
                         const AnalogParams& params) {
    if (message.size() < n_samples)
        throw InvalidArgument("modulate_analog: message shorter than n_samples");
    Waveform w;
    w.samples = analog_baseband(message.first(n_samples), variant, params);
    return normalize_power(std::move(w));
}

Waveform normalize_power(Waveform w) {
    const double p = mean_power(w.samples);
    if (!(p > 0.0) || !std::isfinite(p)) throw DegenerateSignal("normalize_power: signal has zero power");
    const double scale = 1.0 / std::sqrt(p);
    for (auto& s : w.samples) s *= scale;
    w.gain *= scale;
    return w;
}

Waveform synthesize(Variant variant, std::size_t n_samples, std::uint64_t seed, const ShapingConfig& shaping) {
    const auto spec = ModulationSpec::of(variant);
    switch (spec.family) {
        case Family::Analog: {
            const auto msg = make_message(n_samples, derive_seed(seed, Stream::Message));
            return modulate_analog(msg, variant, n_samples);
        }
        case Family::FSK: {
            const auto bits = generate_bits(bits_required(spec, shaping, n_samples), derive_seed(seed, Stream::Bits));
            return modulate_fsk(bits, spec, shaping, n_samples);
        }
        default: {
            const auto bits = generate_bits(bits_required(spec, shaping, n_samples), derive_seed(seed, Stream::Bits));
            return modulate_linear(bits, spec, shaping, n_samples);
        }
    }
}

}  // namespace amc::dsp
