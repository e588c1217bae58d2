#include "escnet/audio/wav.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "escnet/core/errors.h"

namespace escnet::audio {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

struct Reader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;

    void require(size_t n, const char* what) const {
        if (pos + n > size) throw DecodeError(std::string("wav: truncated ") + what);
    }

    uint32_t u32(const char* what) {
        require(4, what);
        uint32_t v = static_cast<uint32_t>(data[pos]) | (static_cast<uint32_t>(data[pos + 1]) << 8) |
                     (static_cast<uint32_t>(data[pos + 2]) << 16) | (static_cast<uint32_t>(data[pos + 3]) << 24);
        pos += 4;
        return v;
    }

    uint16_t u16(const char* what) {
        require(2, what);
        uint16_t v = static_cast<uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }

    std::string tag() {
        require(4, "chunk tag");
        std::string t(reinterpret_cast<const char*>(data + pos), 4);
        pos += 4;
        return t;
    }

    void skip(size_t n, const char* what) {
        require(n, what);
        pos += n;
    }
};

float sample_from_bytes(const uint8_t* p, uint16_t bits, uint16_t format) {
    switch (bits) {
        case 8: // unsigned
            return (static_cast<int>(p[0]) - 128) / 128.0f;
        case 16: {
            const int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
            return static_cast<float>(v) / 32768.0f;
        }
        case 24: {
            int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF; // sign extend
            return static_cast<float>(v) / 8388608.0f;
        }
        case 32: {
            if (format == kFormatFloat) {
                float f;
                std::memcpy(&f, p, 4);
                return f;
            }
            throw UnsupportedFormatError("wav: 32-bit integer PCM not supported");
        }
        default:
            throw UnsupportedFormatError("wav: unsupported bit depth " + std::to_string(bits));
    }
}

} // namespace

AudioClip decode_wav(const std::vector<uint8_t>& bytes) {
    Reader r{bytes.data(), bytes.size()};
    if (r.tag() != "RIFF") throw DecodeError("wav: missing RIFF header");
    r.u32("riff size");
    if (r.tag() != "WAVE") throw DecodeError("wav: missing WAVE form type");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    bool have_fmt = false;

    AudioClip clip;
    bool have_data = false;

    while (r.pos + 8 <= r.size) {
        const std::string chunk = r.tag();
        const uint32_t chunk_size = r.u32("chunk size");
        if (chunk == "fmt ") {
            if (chunk_size < 16) throw DecodeError("wav: fmt chunk too small");
            const size_t end = r.pos + chunk_size;
            format = r.u16("format");
            channels = r.u16("channels");
            sample_rate = r.u32("sample rate");
            r.u32("byte rate");
            r.u16("block align");
            bits = r.u16("bits per sample");
            if (end < r.pos || end > r.size) throw DecodeError("wav: truncated fmt chunk");
            r.pos = end;
            if (format != kFormatPcm && format != kFormatFloat) {
                throw UnsupportedFormatError("wav: unsupported codec " + std::to_string(format));
            }
            if (channels == 0) throw DecodeError("wav: zero channels");
            if (sample_rate == 0) throw DecodeError("wav: zero sample rate");
            have_fmt = true;
        } else if (chunk == "data") {
            if (!have_fmt) throw DecodeError("wav: data chunk before fmt");
            r.require(chunk_size, "data chunk");
            const size_t bytes_per_sample = bits / 8;
            const size_t frame_bytes = bytes_per_sample * channels;
            if (frame_bytes == 0) throw DecodeError("wav: zero frame size");
            const size_t frames = chunk_size / frame_bytes;
            clip.samples.resize(frames);
            const uint8_t* p = r.data + r.pos;
            for (size_t i = 0; i < frames; ++i) {
                float acc = 0.0f;
                for (uint16_t c = 0; c < channels; ++c) {
                    acc += sample_from_bytes(p + i * frame_bytes + c * bytes_per_sample, bits, format);
                }
                clip.samples[i] = std::clamp(acc / static_cast<float>(channels), -1.0f, 1.0f);
            }
            r.pos += chunk_size;
            have_data = true;
        } else {
            // unknown chunk: skip payload (chunks are word-aligned)
            r.skip(chunk_size + (chunk_size & 1), "chunk payload");
        }
    }

    if (!have_data || clip.samples.empty()) throw DecodeError("wav: no sample data");
    clip.sample_rate = static_cast<int>(sample_rate);
    return clip;
}

AudioClip read_wav_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DecodeError("wav: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    AudioClip clip = decode_wav(bytes);
    clip.source_id = path;
    return clip;
}

std::vector<uint8_t> encode_wav16(const std::vector<float>& samples, int sample_rate) {
    const uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
    std::vector<uint8_t> out;
    out.reserve(44 + data_size);
    auto push_u32 = [&](uint32_t v) {
        out.push_back(v & 0xFF);
        out.push_back((v >> 8) & 0xFF);
        out.push_back((v >> 16) & 0xFF);
        out.push_back((v >> 24) & 0xFF);
    };
    auto push_u16 = [&](uint16_t v) {
        out.push_back(v & 0xFF);
        out.push_back((v >> 8) & 0xFF);
    };
    auto push_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };

    push_tag("RIFF");
    push_u32(36 + data_size);
    push_tag("WAVE");
    push_tag("fmt ");
    push_u32(16);
    push_u16(kFormatPcm);
    push_u16(1); // mono
    push_u32(static_cast<uint32_t>(sample_rate));
    push_u32(static_cast<uint32_t>(sample_rate) * 2);
    push_u16(2);
    push_u16(16);
    push_tag("data");
    push_u32(data_size);
    for (const float s : samples) {
        const float clamped = std::clamp(s, -1.0f, 1.0f);
        const int32_t v = static_cast<int32_t>(std::lround(clamped * 32767.0f));
        push_u16(static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    return out;
}

void write_wav_file(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    const auto bytes = encode_wav16(samples, sample_rate);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("wav: cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace escnet::audio
