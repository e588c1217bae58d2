#include "escnet/harness/run_config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "escnet/core/errors.h"

namespace escnet::harness {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    size_t e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Keys every run may set, per section. Synth class parameters are dotted
// (`tone.f_lo`) and validated against the class list instead.
const std::map<std::string, std::vector<std::string>> kKnownKeys = {
    {"dataset", {"name", "manifest"}},
    {"model",
     {"use_waveform", "use_stft", "use_delta", "attention", "attention_final_only",
      "spectral_channels", "waveform_channels", "attention_channels", "head_hidden",
      "freq_bins", "time_frames"}},
    {"train",
     {"epochs", "batch", "lr0", "noise_fraction", "epoch_size", "augment", "fusion", "seed",
      "out"}},
    {"synth", {"seed", "clip_seconds", "classes", "clips_per_class", "folds"}},
};

} // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile file;
    file.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
            }
            file.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any section");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!file.sections_[section].emplace(key, value).second) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return file;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

int64_t ConfigFile::get_int(const std::string& section, const std::string& key, int64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        size_t used = 0;
        const int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: [" + section + "] " + key + " = '" + v + "' is not an integer");
    }
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: [" + section + "] " + key + " = '" + v + "' is not a number");
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: [" + section + "] " + key + " = '" + v + "' is not a boolean");
}

std::vector<int> ConfigFile::get_int_list(const std::string& section, const std::string& key,
                                          const std::vector<int>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("config: [" + section + "] " + key + ": bad integer '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: [" + section + "] " + key + ": empty list");
    return out;
}

std::vector<std::string> ConfigFile::get_string_list(const std::string& section,
                                                     const std::string& key) const {
    std::vector<std::string> out;
    const std::string v = get(section, key, "");
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void TrainOptions::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch < 2) throw ConfigError("train: batch must be >= 2 (batch normalization)");
    if (lr0 <= 0.0f) throw ConfigError("train: lr0 must be positive");
    if (noise_fraction < 0.0 || noise_fraction >= 1.0) {
        throw ConfigError("train: noise_fraction must lie in [0, 1)");
    }
    if (epoch_size < 0) throw ConfigError("train: epoch_size must be >= 0");
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_config(ConfigFile::parse_file(path));
}

RunConfig RunConfig::from_config(const ConfigFile& file) {
    // reject unknown keys up front
    for (const auto& [section, keys] : file.sections()) {
        const auto known = kKnownKeys.find(section);
        if (known == kKnownKeys.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : keys) {
            (void)value;
            if (section == "synth" && key.find('.') != std::string::npos) continue;
            if (std::find(known->second.begin(), known->second.end(), key) == known->second.end()) {
                throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
            }
        }
    }

    RunConfig cfg;
    cfg.dataset_name = file.get("dataset", "name", cfg.dataset_name);
    cfg.manifest_path = file.get("dataset", "manifest", "");
    cfg.out_dir = file.get("train", "out", cfg.out_dir);

    cfg.model.use_waveform = file.get_bool("model", "use_waveform", true);
    cfg.model.use_stft = file.get_bool("model", "use_stft", true);
    cfg.model.use_delta = file.get_bool("model", "use_delta", true);
    cfg.model.attention_enabled = file.get_bool("model", "attention", true);
    cfg.model.attention_final_only = file.get_bool("model", "attention_final_only", false);
    cfg.model.spectral_channels = file.get_int_list("model", "spectral_channels", cfg.model.spectral_channels);
    cfg.model.waveform_channels = file.get_int_list("model", "waveform_channels", cfg.model.waveform_channels);
    cfg.model.attention_channels = static_cast<int>(file.get_int("model", "attention_channels", cfg.model.attention_channels));
    cfg.model.head_hidden = static_cast<int>(file.get_int("model", "head_hidden", cfg.model.head_hidden));
    cfg.model.freq_bins = static_cast<int>(file.get_int("model", "freq_bins", cfg.model.freq_bins));
    cfg.model.time_frames = static_cast<int>(file.get_int("model", "time_frames", cfg.model.time_frames));

    cfg.train.epochs = static_cast<int>(file.get_int("train", "epochs", cfg.train.epochs));
    cfg.train.batch = static_cast<int>(file.get_int("train", "batch", cfg.train.batch));
    cfg.train.lr0 = static_cast<float>(file.get_double("train", "lr0", cfg.train.lr0));
    cfg.train.noise_fraction = file.get_double("train", "noise_fraction", cfg.train.noise_fraction);
    cfg.train.epoch_size = static_cast<int>(file.get_int("train", "epoch_size", cfg.train.epoch_size));
    cfg.train.augment = file.get_bool("train", "augment", cfg.train.augment);
    cfg.train.fusion_eval = file.get_bool("train", "fusion", cfg.train.fusion_eval);
    cfg.train.seed = static_cast<uint64_t>(file.get_int("train", "seed", static_cast<int64_t>(cfg.train.seed)));
    cfg.train.validate();

    cfg.synth.seed = static_cast<uint64_t>(file.get_int("synth", "seed", 42));
    cfg.synth.clip_seconds = file.get_double("synth", "clip_seconds", 5.0);
    cfg.synth_folds = static_cast<int>(file.get_int("synth", "folds", cfg.synth_folds));
    const auto class_kinds = file.get_string_list("synth", "classes");
    const int per_class = static_cast<int>(file.get_int("synth", "clips_per_class", 40));
    for (const auto& kind : class_kinds) {
        audio::ClassSpec cls;
        cls.kind = kind;
        cls.count = per_class;
        const auto section = file.sections().find("synth");
        if (section != file.sections().end()) {
            const std::string prefix = kind + ".";
            for (const auto& [key, value] : section->second) {
                if (key.rfind(prefix, 0) == 0) {
                    cls.params[key.substr(prefix.size())] =
                        file.get_double("synth", key, 0.0);
                }
            }
        }
        cfg.synth.classes.push_back(std::move(cls));
    }
    return cfg;
}

std::string RunConfig::hash() const {
    // canonical serialization -> FNV-1a
    std::ostringstream s;
    s << dataset_name << '|' << manifest_path << '|';
    s << model.num_classes << '|' << model.use_waveform << model.use_stft << model.use_delta
      << model.attention_enabled << model.attention_final_only << '|';
    for (const int c : model.spectral_channels) s << c << ',';
    s << '|';
    for (const int c : model.waveform_channels) s << c << ',';
    s << '|' << model.attention_channels << '|' << model.head_hidden << '|' << model.freq_bins
      << '|' << model.time_frames << '|';
    s << train.epochs << '|' << train.batch << '|' << train.lr0 << '|' << train.noise_fraction
      << '|' << train.epoch_size << '|' << train.augment << '|' << train.fusion_eval << '|'
      << train.seed << '|';
    s << synth.seed << '|' << synth.clip_seconds << '|' << synth_folds << '|';
    for (const auto& cls : synth.classes) {
        s << cls.kind << ':' << cls.count << ':';
        for (const auto& [k, v] : cls.params) s << k << '=' << v << ';';
        s << '|';
    }
    const std::string text = s.str();
    uint64_t h = 1469598103934665603ULL;
    for (const char c : text) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ULL;
    }
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

double lr_schedule(int epoch, double lr0) {
    if (epoch < 0) throw ArgumentError("lr_schedule: negative epoch");
    return lr0 * std::pow(10.0, -static_cast<double>(epoch / 100));
}

} // namespace escnet::harness
