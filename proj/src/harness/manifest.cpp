#include "escnet/harness/manifest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "escnet/audio/resample.h"
#include "escnet/audio/wav.h"
#include "escnet/core/errors.h"

namespace escnet::harness {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

void validate(Manifest& manifest, const std::string& origin) {
    std::set<std::string> paths;
    std::set<int> folds;
    std::set<std::string> labels;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const std::string where = origin + " entry " + std::to_string(i + 1);
        if (e.path.empty()) throw ConfigError(where + ": empty path");
        if (!paths.insert(e.path).second) {
            throw ConfigError(where + ": duplicate path '" + e.path + "'");
        }
        if (e.label.empty()) throw ConfigError(where + ": empty label");
        if (e.fold < 0) throw ConfigError(where + ": negative fold id");
        folds.insert(e.fold);
        labels.insert(e.label);
    }
    if (manifest.entries.empty()) throw ConfigError(origin + ": no entries");
    manifest.num_folds = static_cast<int>(folds.size());
    for (int f = 0; f < manifest.num_folds; ++f) {
        if (!folds.count(f)) {
            throw ConfigError(origin + ": fold ids must be contiguous from 0, missing " +
                              std::to_string(f));
        }
    }
    manifest.class_names.assign(labels.begin(), labels.end()); // std::set is sorted
}

} // namespace

int Manifest::label_index(const std::string& label) const {
    const auto it = std::lower_bound(class_names.begin(), class_names.end(), label);
    if (it == class_names.end() || *it != label) {
        throw ConfigError("manifest: label '" + label + "' not in vocabulary");
    }
    return static_cast<int>(it - class_names.begin());
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("manifest: cannot open " + path);

    Manifest manifest;
    manifest.name = std::filesystem::path(path).stem().string();

    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields.size() != 3 || fields[0] != "path" || fields[1] != "label" || fields[2] != "fold") {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": header must be exactly 'path,label,fold'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                              std::to_string(fields.size()));
        }
        ManifestEntry entry;
        entry.path = fields[0];
        entry.label = fields[1];
        try {
            size_t used = 0;
            entry.fold = std::stoi(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": bad fold id '" + fields[2] + "'");
        }
        manifest.entries.push_back(std::move(entry));
    }
    if (!header_seen) throw ConfigError(path + ": empty manifest");
    validate(manifest, path);
    return manifest;
}

Manifest manifest_from_entries(std::vector<ManifestEntry> entries, const std::string& name) {
    Manifest manifest;
    manifest.name = name;
    manifest.entries = std::move(entries);
    validate(manifest, name);
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("manifest: cannot write " + path);
    out << "path,label,fold\n";
    for (const auto& e : manifest.entries) {
        out << e.path << "," << e.label << "," << e.fold << "\n";
    }
}

int LabeledDataset::num_folds() const {
    int n = 0;
    for (const int f : folds) n = std::max(n, f + 1);
    return n;
}

LabeledDataset load_dataset(const Manifest& manifest, const std::string& base_dir) {
    LabeledDataset dataset;
    dataset.name = manifest.name;
    dataset.class_names = manifest.class_names;
    for (const auto& entry : manifest.entries) {
        std::filesystem::path p(entry.path);
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        auto clip = audio::read_wav_file(p.string());
        clip = audio::resample(clip, audio::kCanonicalRate);
        clip.label = manifest.label_index(entry.label);
        clip.source_id = entry.path;
        dataset.clips.push_back(std::move(clip));
        dataset.folds.push_back(entry.fold);
    }
    return dataset;
}

} // namespace escnet::harness
