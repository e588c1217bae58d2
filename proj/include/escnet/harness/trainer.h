#pragma once

#include <memory>
#include <string>
#include <vector>

#include "escnet/augment/mixing.h"
#include "escnet/harness/manifest.h"
#include "escnet/harness/run_config.h"
#include "escnet/model/classifier.h"
#include "escnet/nn/adam.h"

namespace escnet::harness {

struct FoldResult {
    int fold = -1;
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion; // [true][predicted]
    double wall_seconds = 0.0;               // reported separately, never in metrics.json
};

struct MetricsReport {
    std::string dataset;
    std::string config_hash;
    std::vector<std::string> classes;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;

    // internal consistency: accuracy recomputed from each confusion matrix
    void check() const;
};

// Epoch-driven trainer over an in-memory clip set.
class Trainer {
public:
    Trainer(std::vector<audio::AudioClip> clips, const model::ModelConfig& model_cfg,
            const TrainOptions& options);

    // One pass of epoch_size samples at the scheduled learning rate.
    // Returns the mean batch loss.
    double run_epoch();

    // Keeps stepping until `max_steps` optimizer steps have run or the
    // training accuracy reaches `target_accuracy` (checked once per epoch).
    // Returns the number of steps taken.
    int64_t train_until(int64_t max_steps, double target_accuracy);

    double evaluate_accuracy(const std::vector<audio::AudioClip>& clips,
                             std::vector<std::vector<int>>* confusion = nullptr);

    model::Classifier<float>& classifier() { return *model_; }
    nn::Adam<float>& optimizer() { return *optimizer_; }
    int epoch() const { return epoch_; }
    int64_t steps() const { return steps_; }
    const TrainOptions& options() const { return options_; }

private:
    std::vector<audio::AudioClip> clips_;
    TrainOptions options_;
    std::shared_ptr<model::Classifier<float>> model_;
    std::unique_ptr<nn::Adam<float>> optimizer_;
    int epoch_ = 0;
    int64_t steps_ = 0;
};

struct FoldRun {
    FoldResult metrics;
    std::shared_ptr<model::Classifier<float>> model;
};

// Trains on every clip outside `fold`, evaluates on the clips inside it.
FoldRun train_fold(const LabeledDataset& dataset, int fold, const model::ModelConfig& model_cfg,
                   const TrainOptions& options);

struct CrossValidation {
    MetricsReport report;
    std::vector<std::shared_ptr<model::Classifier<float>>> fold_models;
};

CrossValidation cross_validate(const LabeledDataset& dataset, const RunConfig& cfg);

// The eight configuration rows of the component-contribution study.
struct AblationRow {
    std::string name;
    MetricsReport report;
    std::shared_ptr<model::Classifier<float>> model; // fold-0 model of the variant
};

// Runs each variant with the same seeds; `folds_limit` restricts how many
// folds each variant trains (0 = all).
std::vector<AblationRow> ablate(const LabeledDataset& dataset, const RunConfig& cfg,
                                int folds_limit = 0);

// Serialization of results.
std::string metrics_to_json(const MetricsReport& report);
void write_metrics(const MetricsReport& report, const std::string& path);
void write_confusion_csv(const MetricsReport& report, const std::string& path);
void write_timing(const MetricsReport& report, const std::string& path);
std::string ablation_to_json(const std::vector<AblationRow>& rows);

} // namespace escnet::harness
