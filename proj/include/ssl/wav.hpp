#pragma once

#include "ssl/types.hpp"

#include <string>

namespace ssl {

// RIFF/WAVE io. Reading accepts 16/24/32-bit integer PCM and 32-bit float;
// writing always emits 32-bit float so a read-back is bit exact.
SampleBlock read_wav(const std::string& path);
void write_wav(const std::string& path, const SampleBlock& block);

} // namespace ssl
