#pragma once

#include <memory>
#include <string>

#include "escnet/model/classifier.h"
#include "escnet/nn/adam.h"

namespace escnet::harness {

// Binary container (little-endian): magic "ESCK", version, model config as
// a JSON blob, epoch counter, named parameter table (shapes + f32 data),
// named buffer table, and the optimizer state aligned with the trainable
// parameter list.
void save_checkpoint(const std::string& path, const model::Classifier<float>& model,
                     const nn::Adam<float>* optimizer, int epoch);

struct LoadedCheckpoint {
    std::shared_ptr<model::Classifier<float>> model;
    std::unique_ptr<nn::Adam<float>> optimizer; // null when none was stored
    int epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const std::string& text);

} // namespace escnet::harness
