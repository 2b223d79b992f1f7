#include "ssl/stft.hpp"

#include "ssl/fft.hpp"

#include <cmath>

namespace ssl {

void StftConfig::validate() const {
    if (frame_length == 0) throw ValidationError("frame_length must be positive");
    if (shift == 0) throw ValidationError("shift must be positive");
    if (shift > frame_length) throw ValidationError("shift must not exceed frame_length");
    if (bin_min > bin_max) throw ValidationError("bin_min must not exceed bin_max");
    if (bin_max > frame_length / 2)
        throw ValidationError("bin_max exceeds the half spectrum of frame_length");
}

const char* window_name(WindowKind w) {
    return w == WindowKind::hann ? "hann" : "rectangular";
}

WindowKind window_from_name(const std::string& name) {
    if (name == "hann") return WindowKind::hann;
    if (name == "rectangular" || name == "rect") return WindowKind::rectangular;
    throw ValidationError("unknown window '" + name + "'");
}

std::vector<float> make_window(WindowKind kind, std::uint32_t length) {
    std::vector<float> w(length, 1.0f);
    if (kind == WindowKind::hann) {
        // periodic form, the usual choice for overlapped analysis
        for (std::uint32_t n = 0; n < length; ++n)
            w[n] = float(0.5 - 0.5 * std::cos(2.0 * M_PI * double(n) / double(length)));
    }
    return w;
}

std::size_t stft_frame_count(const SampleBlock& block, const StftConfig& cfg) {
    const std::size_t n = block.frame_count();
    if (n < cfg.frame_length) return 0;
    return (n - cfg.frame_length) / cfg.shift + 1;
}

SpectrumFrame stft_frame(const SampleBlock& block, const StftConfig& cfg,
                         const std::vector<float>& window, std::size_t frame_index) {
    const std::size_t offset = frame_index * cfg.shift;
    SpectrumFrame frame;
    frame.frame_index = std::uint32_t(frame_index);
    frame.spectra.resize(block.channel_count());

    std::vector<float> buf(cfg.frame_length);
    for (std::size_t m = 0; m < block.channel_count(); ++m) {
        const float* src = block.channels[m].data() + offset;
        for (std::uint32_t i = 0; i < cfg.frame_length; ++i) buf[i] = src[i] * window[i];
        const auto spectrum = real_dft_half(buf);
        frame.spectra[m].assign(spectrum.begin() + cfg.bin_min, spectrum.begin() + cfg.bin_max + 1);
    }
    return frame;
}

void stft_stream(const SampleBlock& block, const StftConfig& cfg,
                 const std::function<void(const SpectrumFrame&)>& sink) {
    block.validate();
    cfg.validate();
    const auto window = make_window(cfg.window, cfg.frame_length);
    const std::size_t frames = stft_frame_count(block, cfg);
    for (std::size_t f = 0; f < frames; ++f) sink(stft_frame(block, cfg, window, f));
}

} // namespace ssl
