#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssl {

// Error taxonomy. The CLI maps these to distinct exit codes so scripts can
// tell "bad input" from "solver blew up" from "disk trouble".
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

using cfloat = std::complex<float>;
using cdouble = std::complex<double>;

// A block of multichannel time-domain audio, one vector per channel,
// all channels the same length.
struct SampleBlock {
    std::uint32_t sample_rate = 16000;
    std::vector<std::vector<float>> channels;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t frame_count() const { return channels.empty() ? 0 : channels[0].size(); }
    void validate() const;
};

enum class WindowKind { hann, rectangular };

// Analysis parameters for the short-time transform. bin_min/bin_max are
// inclusive indices into the half spectrum; only that band is kept.
struct StftConfig {
    std::uint32_t frame_length = 512;
    std::uint32_t shift = 160;
    WindowKind window = WindowKind::hann;
    std::uint32_t bin_min = 16;
    std::uint32_t bin_max = 88;

    std::uint32_t bin_count() const { return bin_max - bin_min + 1; }
    void validate() const;
};

// One time frame of the transform: per channel, the retained band of
// complex spectrum values. spectra[m][b] is channel m, bin (bin_min + b).
struct SpectrumFrame {
    std::uint32_t frame_index = 0;
    std::vector<std::vector<cfloat>> spectra;

    std::size_t channel_count() const { return spectra.size(); }
};

const char* window_name(WindowKind w);
WindowKind window_from_name(const std::string& name);

} // namespace ssl
