#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "escnet/audio/clip.h"

namespace escnet::audio {

// Decodes a RIFF/WAV byte stream: PCM 8/16/24-bit integer or 32-bit float,
// any channel count (channels are averaged to mono), amplitudes mapped to
// [-1, 1]. The original sample rate is preserved in the clip metadata.
// Throws DecodeError on malformed containers and UnsupportedFormatError on
// codecs outside that set.
AudioClip decode_wav(const std::vector<uint8_t>& bytes);

AudioClip read_wav_file(const std::string& path);

// 16-bit PCM mono writer; enough for dataset synthesis and fixtures.
std::vector<uint8_t> encode_wav16(const std::vector<float>& samples, int sample_rate);

void write_wav_file(const std::string& path, const std::vector<float>& samples, int sample_rate);

} // namespace escnet::audio
