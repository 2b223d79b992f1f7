#pragma once

#include "ssl/types.hpp"

#include <functional>
#include <vector>

namespace ssl {

std::vector<float> make_window(WindowKind kind, std::uint32_t length);

// Number of analysis frames a block yields: frames start at multiples of
// shift and must fit entirely inside the block.
std::size_t stft_frame_count(const SampleBlock& block, const StftConfig& cfg);

// Extract one analysis frame (all channels, retained band only).
SpectrumFrame stft_frame(const SampleBlock& block, const StftConfig& cfg,
                         const std::vector<float>& window, std::size_t frame_index);

// Run the full transform, handing frames to the sink one at a time so the
// caller never has to hold the whole spectrogram.
void stft_stream(const SampleBlock& block, const StftConfig& cfg,
                 const std::function<void(const SpectrumFrame&)>& sink);

} // namespace ssl
