#pragma once

// Tapped-delay-line block fading and SNR-calibrated AWGN.

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "amc/modulation.hpp"

namespace amc::channel {

using dsp::cplx;

enum class ChannelKind : std::uint8_t {
    Ideal = 0,
    Static = 1,
    Rayleigh = 2,
    Rician = 3,
    Nakagami = 4,
    // Records imported from an external dataset whose channel is not known.
    UnknownUpstream = 255,
};

inline constexpr std::array<ChannelKind, 5> kSimulatedKinds{ChannelKind::Ideal, ChannelKind::Static,
                                                            ChannelKind::Rayleigh, ChannelKind::Rician,
                                                            ChannelKind::Nakagami};

std::string_view kind_name(ChannelKind k);
ChannelKind parse_kind(std::string_view name);
ChannelKind kind_from_id(std::uint8_t id);

bool is_fading(ChannelKind k);

struct ChannelSpec {
    ChannelKind kind = ChannelKind::Ideal;
    double rician_k = 3.0;
    double nakagami_m = 2.0;
    unsigned n_taps = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ChannelRealization {
    std::vector<cplx> taps;
    std::vector<double> profile_powers;
    ChannelKind kind = ChannelKind::Ideal;
    std::uint64_t seed = 0;
};

/// Normalized ITU-R M.1225 power-delay profile: Pedestrian-A for 4 taps,
/// Vehicular-A for 6 taps, one tap per sample.
std::vector<double> profile_for(unsigned n_taps);

ChannelRealization draw_channel(const ChannelSpec& spec);

/// Same-length linear convolution; the head keeps the filter transient.
dsp::Waveform apply_channel(const dsp::Waveform& in, const ChannelRealization& ch);

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// Complex Gaussian noise with variance P/10^(snr/10), P measured on `in`.
/// An infinite SNR yields all-zero noise.
std::vector<cplx> awgn_noise(std::span<const cplx> in, double snr_db, std::uint64_t seed);

dsp::Waveform add_awgn(const dsp::Waveform& in, double snr_db, std::uint64_t seed);

}  // namespace amc::channel
