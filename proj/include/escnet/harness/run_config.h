#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "escnet/audio/synth.h"
#include "escnet/model/config.h"

namespace escnet::harness {

// Sectioned key-value configuration file:
//   [section]
//   key = value        # comment
// Values are typed by the consumer. Unknown keys are rejected so typos
// cannot silently fall back to defaults.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                  const std::vector<int>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& section, const std::string& key) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::string origin_;
};

struct TrainOptions {
    int epochs = 150;
    int batch = 16;
    float lr0 = 1e-3f;
    double noise_fraction = 1.0 / 16.0;
    int epoch_size = 0; // 0 -> one sample per training clip
    bool augment = true;
    bool fusion_eval = true;
    uint64_t seed = 1234;

    void validate() const;
};

// Everything a run needs. Derived from a config file plus command-line
// overrides; hashed into metrics so results are traceable to settings.
struct RunConfig {
    std::string dataset_name = "dataset";
    std::string manifest_path;
    std::string out_dir = "runs/out";
    model::ModelConfig model;
    TrainOptions train;
    audio::SynthSpec synth;
    int synth_folds = 5;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_config(const ConfigFile& file);

    // Stable fingerprint of every setting that influences results.
    std::string hash() const;
};

// Learning-rate schedule: lr0 / 10^(floor(epoch / 100)).
double lr_schedule(int epoch, double lr0);

} // namespace escnet::harness
