#pragma once

#include <string>
#include <vector>

#include "escnet/dsp/features.h"

namespace escnet::harness {

// Binary feature container (little-endian): magic "ESCF", version, class
// count, record count; per record the source id, noise flag, waveform,
// STFT stack, delta stack (shapes inline), and the label target. A JSON
// sidecar carries provenance next to it.
void write_features(const std::vector<dsp::FeatureTriple>& triples, int num_classes,
                    const std::string& bin_path, const std::string& json_path,
                    const std::string& dataset_name, const std::string& config_hash);

std::vector<dsp::FeatureTriple> read_features(const std::string& bin_path);

} // namespace escnet::harness
