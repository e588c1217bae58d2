#include "escnet/harness/features_io.h"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "escnet/audio/clip.h"
#include "escnet/core/errors.h"

namespace escnet::harness {
namespace {

constexpr char kMagic[4] = {'E', 'S', 'C', 'F'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DecodeError("features: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> get_floats(std::istream& in) {
    const uint32_t n = get_u32(in);
    std::vector<float> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(float)))) {
        throw DecodeError("features: truncated payload");
    }
    return v;
}

} // namespace

void write_features(const std::vector<dsp::FeatureTriple>& triples, int num_classes,
                    const std::string& bin_path, const std::string& json_path,
                    const std::string& dataset_name, const std::string& config_hash) {
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw ArgumentError("features: cannot write " + bin_path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(num_classes));
    put_u32(out, static_cast<uint32_t>(triples.size()));
    for (const auto& t : triples) {
        put_u32(out, static_cast<uint32_t>(t.source_id.size()));
        out.write(t.source_id.data(), static_cast<std::streamsize>(t.source_id.size()));
        out.put(t.is_noise ? 1 : 0);
        put_floats(out, t.waveform);
        put_u32(out, 3);
        put_u32(out, dsp::kFreqRows);
        put_u32(out, dsp::kTimeCols);
        put_floats(out, t.stft);
        put_floats(out, t.delta);
        put_floats(out, t.label_target);
    }

    nlohmann::ordered_json j;
    j["dataset"] = dataset_name;
    j["config_hash"] = config_hash;
    j["records"] = triples.size();
    j["num_classes"] = num_classes;
    j["shapes"] = {
        {"waveform", {audio::kSegmentSamples}},
        {"stft", {3, dsp::kFreqRows, dsp::kTimeCols}},
        {"delta", {3, dsp::kFreqRows, dsp::kTimeCols}},
    };
    nlohmann::ordered_json sources = nlohmann::ordered_json::array();
    for (const auto& t : triples) sources.push_back(t.source_id);
    j["sources"] = std::move(sources);
    std::ofstream side(json_path);
    if (!side) throw ArgumentError("features: cannot write " + json_path);
    side << j.dump(2) << "\n";
}

std::vector<dsp::FeatureTriple> read_features(const std::string& bin_path) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw ArgumentError("features: cannot open " + bin_path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DecodeError("features: bad magic");
    }
    if (get_u32(in) != kVersion) throw DecodeError("features: unsupported version");
    const uint32_t num_classes = get_u32(in);
    const uint32_t count = get_u32(in);
    std::vector<dsp::FeatureTriple> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        dsp::FeatureTriple t;
        const uint32_t id_len = get_u32(in);
        t.source_id.resize(id_len);
        if (!in.read(t.source_id.data(), id_len)) throw DecodeError("features: truncated id");
        t.is_noise = in.get() == 1;
        t.waveform = get_floats(in);
        const uint32_t c = get_u32(in), f = get_u32(in), tt = get_u32(in);
        if (c != 3 || f != dsp::kFreqRows || tt != dsp::kTimeCols) {
            throw DecodeError("features: unexpected stack shape");
        }
        t.stft = get_floats(in);
        t.delta = get_floats(in);
        t.label_target = get_floats(in);
        if (t.label_target.size() != num_classes) throw DecodeError("features: bad label length");
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace escnet::harness
