#include "escnet/harness/checkpoint.h"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "escnet/core/errors.h"

namespace escnet::harness {
namespace {

constexpr char kMagic[4] = {'E', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

void put_i64(std::ostream& out, int64_t v) {
    put_u32(out, static_cast<uint32_t>(v & 0xFFFFFFFF));
    put_u32(out, static_cast<uint32_t>(static_cast<uint64_t>(v) >> 32));
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DecodeError("checkpoint: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

int64_t get_i64(std::istream& in) {
    const uint64_t lo = get_u32(in);
    const uint64_t hi = get_u32(in);
    return static_cast<int64_t>(lo | (hi << 32));
}

std::string get_string(std::istream& in) {
    const uint32_t n = get_u32(in);
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw DecodeError("checkpoint: truncated string");
    return s;
}

std::vector<float> get_floats(std::istream& in) {
    const uint32_t n = get_u32(in);
    std::vector<float> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(float)))) {
        throw DecodeError("checkpoint: truncated payload");
    }
    return v;
}

void put_tensor_table(std::ostream& out, const std::vector<nn::ParamRef<float>>& table) {
    put_u32(out, static_cast<uint32_t>(table.size()));
    for (const auto& p : table) {
        put_string(out, p.name);
        put_u32(out, static_cast<uint32_t>(p.tensor.shape().size()));
        for (const int d : p.tensor.shape()) put_u32(out, static_cast<uint32_t>(d));
        put_floats(out, p.tensor.data());
    }
}

void read_tensor_table(std::istream& in, std::vector<nn::ParamRef<float>> table,
                       const char* what) {
    std::map<std::string, nn::ParamRef<float>*> by_name;
    for (auto& p : table) by_name[p.name] = &p;
    const uint32_t count = get_u32(in);
    if (count != table.size()) {
        throw DecodeError(std::string("checkpoint: ") + what + " count mismatch");
    }
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = get_string(in);
        const uint32_t ndim = get_u32(in);
        nn::Shape shape(ndim);
        for (auto& d : shape) d = static_cast<int>(get_u32(in));
        auto values = get_floats(in);
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw DecodeError("checkpoint: unknown tensor '" + name + "'");
        if (it->second->tensor.shape() != shape || it->second->tensor.size() != values.size()) {
            throw DecodeError("checkpoint: shape mismatch for '" + name + "'");
        }
        it->second->tensor.data() = std::move(values);
    }
}

} // namespace

std::string model_config_to_json(const model::ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["num_classes"] = cfg.num_classes;
    j["use_waveform"] = cfg.use_waveform;
    j["use_stft"] = cfg.use_stft;
    j["use_delta"] = cfg.use_delta;
    j["attention_enabled"] = cfg.attention_enabled;
    j["attention_final_only"] = cfg.attention_final_only;
    j["spectral_channels"] = cfg.spectral_channels;
    j["waveform_channels"] = cfg.waveform_channels;
    j["attention_channels"] = cfg.attention_channels;
    j["head_hidden"] = cfg.head_hidden;
    j["freq_bins"] = cfg.freq_bins;
    j["time_frames"] = cfg.time_frames;
    return j.dump();
}

model::ModelConfig model_config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    model::ModelConfig cfg;
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.use_waveform = j.at("use_waveform").get<bool>();
    cfg.use_stft = j.at("use_stft").get<bool>();
    cfg.use_delta = j.at("use_delta").get<bool>();
    cfg.attention_enabled = j.at("attention_enabled").get<bool>();
    cfg.attention_final_only = j.at("attention_final_only").get<bool>();
    cfg.spectral_channels = j.at("spectral_channels").get<std::vector<int>>();
    cfg.waveform_channels = j.at("waveform_channels").get<std::vector<int>>();
    cfg.attention_channels = j.at("attention_channels").get<int>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.freq_bins = j.at("freq_bins").get<int>();
    cfg.time_frames = j.at("time_frames").get<int>();
    return cfg;
}

void save_checkpoint(const std::string& path, const model::Classifier<float>& model,
                     const nn::Adam<float>* optimizer, int epoch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_string(out, model_config_to_json(model.config()));
    put_u32(out, static_cast<uint32_t>(epoch));
    put_tensor_table(out, model.parameters());
    put_tensor_table(out, model.buffers());

    put_u32(out, optimizer ? 1 : 0);
    if (optimizer) {
        put_i64(out, optimizer->step_count());
        put_u32(out, static_cast<uint32_t>(optimizer->slots().size()));
        for (size_t i = 0; i < optimizer->slots().size(); ++i) {
            put_string(out, optimizer->params()[i].name);
            put_floats(out, optimizer->slots()[i].m);
            put_floats(out, optimizer->slots()[i].v);
        }
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("checkpoint: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DecodeError("checkpoint: bad magic");
    }
    const uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw DecodeError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto cfg = model_config_from_json(get_string(in));

    LoadedCheckpoint loaded;
    loaded.epoch = static_cast<int>(get_u32(in));
    loaded.model = std::make_shared<model::Classifier<float>>(cfg, 0);
    read_tensor_table(in, loaded.model->parameters(), "parameter");
    read_tensor_table(in, loaded.model->buffers(), "buffer");

    if (get_u32(in) == 1) {
        loaded.optimizer = std::make_unique<nn::Adam<float>>(loaded.model->trainable_parameters());
        loaded.optimizer->set_step_count(get_i64(in));
        const uint32_t count = get_u32(in);
        if (count != loaded.optimizer->slots().size()) {
            throw DecodeError("checkpoint: optimizer slot count mismatch");
        }
        for (uint32_t i = 0; i < count; ++i) {
            const std::string name = get_string(in);
            if (name != loaded.optimizer->params()[i].name) {
                throw DecodeError("checkpoint: optimizer slot order mismatch at '" + name + "'");
            }
            loaded.optimizer->slots()[i].m = get_floats(in);
            loaded.optimizer->slots()[i].v = get_floats(in);
        }
    }
    return loaded;
}

} // namespace escnet::harness
