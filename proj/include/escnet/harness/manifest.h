#pragma once

#include <string>
#include <vector>

#include "escnet/audio/clip.h"

namespace escnet::harness {

struct ManifestEntry {
    std::string path;
    std::string label;
    int fold = 0;
};

struct Manifest {
    std::string name;
    std::vector<ManifestEntry> entries;
    std::vector<std::string> class_names; // sorted lexicographically
    int num_folds = 0;

    int label_index(const std::string& label) const;
};

// CSV with header `path,label,fold`. Fold ids must be contiguous from 0 and
// paths unique; violations raise ConfigError naming the offending line.
Manifest load_manifest(const std::string& path);

Manifest manifest_from_entries(std::vector<ManifestEntry> entries, const std::string& name);

void write_manifest(const Manifest& manifest, const std::string& path);

// Clips with labels resolved against the manifest vocabulary and fold ids
// aligned by index. Relative paths resolve against the manifest directory.
struct LabeledDataset {
    std::string name;
    std::vector<audio::AudioClip> clips;
    std::vector<int> folds;
    std::vector<std::string> class_names;

    int num_folds() const;
};

LabeledDataset load_dataset(const Manifest& manifest, const std::string& base_dir);

} // namespace escnet::harness
