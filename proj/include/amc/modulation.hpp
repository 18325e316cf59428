#pragma once

// Clean complex-baseband waveform synthesis for the 26 modulation types:
// bit sources, Gray-mapped constellations, raised-cosine pulse shaping,
// continuous-phase FSK and the analog AM/FM/PM family.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace amc::dsp {

using cplx = std::complex<double>;

enum class Family : std::uint8_t { Analog = 0, FSK = 1, PAM = 2, PSK = 3, QAM = 4 };

inline constexpr int kFamilyCount = 5;

std::string_view family_name(Family f);

/// Every modulation type the generator knows. The numeric value is the
/// modulation id stored in the container.
enum class Variant : std::uint16_t {
    AM_DSB = 0, AM_SC, AM_USB, AM_LSB, FM, PM,
    FSK2, FSK4, FSK8, FSK16,
    PAM4, PAM8, PAM16,
    BPSK, QPSK, PSK8, PSK16, PSK32, PSK64,
    QAM4, QAM8, QAM16, QAM32, QAM64, QAM128, QAM256,
};

inline constexpr int kVariantCount = 26;

const std::array<Variant, kVariantCount>& all_variants();

std::string_view variant_name(Variant v);

/// Accepts the canonical names ("AM-DSB", "16-QAM", "BPSK", ...). Anything
/// else throws InvalidArgument.
Variant parse_variant(std::string_view name);

Variant variant_from_id(std::uint16_t id);

Family family_of(Variant v);

struct ModulationSpec {
    Variant variant;
    Family family;
    unsigned order;            // M; 1 for analog
    unsigned bits_per_symbol;  // log2(M); 0 for analog

    static ModulationSpec of(Variant v);

    bool is_linear() const { return family == Family::PAM || family == Family::PSK || family == Family::QAM; }
};

struct ShapingConfig {
    unsigned oversampling = 2;
    double rolloff = 0.35;
    unsigned span = 8;

    void validate() const;
};

struct Waveform {
    std::vector<cplx> samples;
    // Product of every scale factor applied by normalize_power; lets a
    // receiver undo normalization when recovering symbols.
    double gain = 1.0;

    std::size_t size() const { return samples.size(); }
};

double mean_power(std::span<const cplx> x);

std::vector<std::uint8_t> generate_bits(std::size_t count, std::uint64_t seed);

/// Constellation points indexed by their bit label, at unit average energy.
std::vector<cplx> constellation(const ModulationSpec& spec);

std::vector<cplx> map_symbols(std::span<const std::uint8_t> bits, const ModulationSpec& spec);

/// Minimum-distance slicer; on an exact tie the lowest label wins.
std::vector<std::uint8_t> demap_symbols(std::span<const cplx> symbols, const ModulationSpec& spec);

/// Unit-peak raised-cosine taps, odd length 2*span*oversampling + 1.
std::vector<double> raised_cosine_taps(const ShapingConfig& shaping);

/// Continuous-time raised-cosine pulse at t (in symbol periods), unit peak.
double raised_cosine(double t, double rolloff);

/// Bits consumed by modulate_linear / modulate_fsk for the given window.
std::size_t bits_required(const ModulationSpec& spec, const ShapingConfig& shaping, std::size_t n_samples);

Waveform modulate_linear(std::span<const std::uint8_t> bits, const ModulationSpec& spec,
                         const ShapingConfig& shaping, std::size_t n_samples);

/// Symbols whose pulse peaks fall inside a modulate_linear window, as
/// [first, first + count) indices into the mapped symbol stream.
struct SymbolWindow {
    std::size_t first;
    std::size_t count;
};
SymbolWindow visible_symbols(const ShapingConfig& shaping, std::size_t n_samples);

/// Samples a modulate_linear waveform at its symbol instants (zero-ISI
/// points of the raised-cosine pulse), removes the normalization gain and
/// slices. Returns the bits of the visible symbols.
std::vector<std::uint8_t> demodulate_linear(const Waveform& wave, const ModulationSpec& spec,
                                            const ShapingConfig& shaping);

/// Tone frequency (cycles per sample) of FSK symbol k out of M.
double fsk_tone(unsigned k, unsigned order);

Waveform modulate_fsk(std::span<const std::uint8_t> bits, const ModulationSpec& spec,
                      const ShapingConfig& shaping, std::size_t n_samples);

/// Frequency-discriminator receiver for modulate_fsk output.
std::vector<std::uint8_t> demodulate_fsk(const Waveform& wave, const ModulationSpec& spec,
                                         const ShapingConfig& shaping);

/// Zero-mean, unit-variance Gaussian message low-passed to fs/8.
std::vector<double> make_message(std::size_t n_samples, std::uint64_t seed);

struct AnalogParams {
    double am_depth = 0.5;           // AM-DSB modulation index
    double fm_sensitivity = 0.1;     // peak deviation per unit message, in fs
    double pm_sensitivity = 1.5707963267948966;  // rad per unit message
};

/// Pre-normalization analog waveform (no power scaling applied).
std::vector<cplx> analog_baseband(std::span<const double> message, Variant variant,
                                  const AnalogParams& params = {});

Waveform modulate_analog(std::span<const double> message, Variant variant, std::size_t n_samples,
                         const AnalogParams& params = {});

/// Discrete Hilbert transform via the analytic signal (FFT based).
std::vector<double> hilbert(std::span<const double> x);

Waveform normalize_power(Waveform w);

/// One clean record of the given variant, drawing bits/message from seed.
Waveform synthesize(Variant variant, std::size_t n_samples, std::uint64_t seed,
                    const ShapingConfig& shaping = {});

}  // namespace amc::dsp
