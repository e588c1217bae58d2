#include "escnet/harness/trainer.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "escnet/core/errors.h"
#include "escnet/core/threading.h"

namespace escnet::harness {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// seed-stream tags
constexpr uint64_t kInitTag = 0x1A17;
constexpr uint64_t kEpochTag = 0xE60C;

} // namespace

void MetricsReport::check() const {
    for (const auto& fold : folds) {
        long correct = 0, total = 0;
        for (size_t t = 0; t < fold.confusion.size(); ++t) {
            for (size_t p = 0; p < fold.confusion[t].size(); ++p) {
                total += fold.confusion[t][p];
                if (t == p) correct += fold.confusion[t][p];
            }
        }
        const double derived = total > 0 ? static_cast<double>(correct) / total : 0.0;
        if (std::abs(derived - fold.accuracy) > 1e-9) {
            throw InvariantError("metrics: fold accuracy disagrees with its confusion matrix");
        }
    }
}

Trainer::Trainer(std::vector<audio::AudioClip> clips, const model::ModelConfig& model_cfg,
                 const TrainOptions& options)
    : clips_(std::move(clips)), options_(options) {
    options_.validate();
    if (clips_.empty()) throw ArgumentError("trainer: no training clips");
    model_ = std::make_shared<model::Classifier<float>>(model_cfg, derive_seed(options_.seed, kInitTag));
    optimizer_ = std::make_unique<nn::Adam<float>>(model_->trainable_parameters());
}

double Trainer::run_epoch() {
    const int epoch_size = options_.epoch_size > 0 ? options_.epoch_size
                                                   : static_cast<int>(clips_.size());
    RngStream rng(derive_seed(options_.seed, kEpochTag, static_cast<uint64_t>(epoch_)));
    const auto plan = augment::build_epoch_plan(clips_, epoch_size, options_.noise_fraction,
                                                options_.augment, rng);
    const float lr = static_cast<float>(lr_schedule(epoch_, options_.lr0));
    const int k = model_->config().num_classes;

    double loss_sum = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < plan.items.size(); begin += static_cast<size_t>(options_.batch)) {
        const size_t end = std::min(plan.items.size(), begin + static_cast<size_t>(options_.batch));
        if (end - begin < 2) break; // batch normalization needs at least two samples

        std::vector<dsp::FeatureTriple> triples(end - begin);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
        for (long i = 0; i < static_cast<long>(triples.size()); ++i) {
            triples[static_cast<size_t>(i)] =
                augment::materialize(plan.items[begin + static_cast<size_t>(i)], clips_, k);
        }
        std::vector<const dsp::FeatureTriple*> ptrs;
        ptrs.reserve(triples.size());
        for (const auto& t : triples) ptrs.push_back(&t);
        auto batch = augment::pack_batch(ptrs, k);

        optimizer_->zero_grad();
        auto out = model_->forward(batch.inputs, true);
        auto loss = nn::mae_loss(out.posterior, batch.targets);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            throw TrainingError("training loss is not finite at epoch " + std::to_string(epoch_) +
                                ", step " + std::to_string(steps_));
        }
        nn::backward(loss);
        optimizer_->step(lr);
        ++steps_;
        loss_sum += loss_value;
        ++batches;
    }
    ++epoch_;
    return batches > 0 ? loss_sum / batches : 0.0;
}

int64_t Trainer::train_until(int64_t max_steps, double target_accuracy) {
    while (steps_ < max_steps) {
        run_epoch();
        if (evaluate_accuracy(clips_) >= target_accuracy) break;
    }
    return steps_;
}

double Trainer::evaluate_accuracy(const std::vector<audio::AudioClip>& clips,
                                  std::vector<std::vector<int>>* confusion) {
    const int k = model_->config().num_classes;
    if (confusion) confusion->assign(static_cast<size_t>(k), std::vector<int>(static_cast<size_t>(k), 0));
    long correct = 0;
    for (const auto& clip : clips) {
        const auto [predicted, posterior] = augment::classify_clip(clip, *model_, options_.fusion_eval);
        (void)posterior;
        if (predicted == clip.label) ++correct;
        if (confusion) ++(*confusion)[static_cast<size_t>(clip.label)][static_cast<size_t>(predicted)];
    }
    return clips.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(clips.size());
}

FoldRun train_fold(const LabeledDataset& dataset, int fold, const model::ModelConfig& model_cfg,
                   const TrainOptions& options) {
    if (fold < 0 || fold >= dataset.num_folds()) {
        throw ArgumentError("train_fold: fold " + std::to_string(fold) + " does not exist");
    }
    std::vector<audio::AudioClip> train_clips, test_clips;
    for (size_t i = 0; i < dataset.clips.size(); ++i) {
        (dataset.folds[i] == fold ? test_clips : train_clips).push_back(dataset.clips[i]);
    }
    if (train_clips.empty() || test_clips.empty()) {
        throw ArgumentError("train_fold: fold " + std::to_string(fold) + " leaves an empty split");
    }
    // no source may appear on both sides of the split
    std::set<std::string> train_ids;
    for (const auto& c : train_clips) train_ids.insert(c.source_id);
    for (const auto& c : test_clips) {
        if (train_ids.count(c.source_id)) {
            throw InvariantError("train_fold: source '" + c.source_id + "' leaks across the split");
        }
    }

    auto model_cfg_sized = model_cfg;
    model_cfg_sized.num_classes = static_cast<int>(dataset.class_names.size());

    TrainOptions fold_options = options;
    fold_options.seed = derive_seed(options.seed, 0xF07D, static_cast<uint64_t>(fold));

    const auto t0 = Clock::now();
    Trainer trainer(std::move(train_clips), model_cfg_sized, fold_options);
    for (int e = 0; e < fold_options.epochs; ++e) trainer.run_epoch();

    FoldRun run;
    run.metrics.fold = fold;
    run.metrics.accuracy = trainer.evaluate_accuracy(test_clips, &run.metrics.confusion);
    run.metrics.wall_seconds = seconds_since(t0);
    run.model = std::make_shared<model::Classifier<float>>(std::move(trainer.classifier()));
    return run;
}

CrossValidation cross_validate(const LabeledDataset& dataset, const RunConfig& cfg) {
    const int n_folds = dataset.num_folds();
    if (n_folds < 2) throw ArgumentError("cross_validate: need at least two folds");

    CrossValidation cv;
    cv.report.dataset = dataset.name;
    cv.report.config_hash = cfg.hash();
    cv.report.classes = dataset.class_names;
    double acc_sum = 0.0;
    for (int fold = 0; fold < n_folds; ++fold) {
        auto run = train_fold(dataset, fold, cfg.model, cfg.train);
        acc_sum += run.metrics.accuracy;
        cv.report.folds.push_back(std::move(run.metrics));
        cv.fold_models.push_back(std::move(run.model));
    }
    cv.report.mean_accuracy = acc_sum / n_folds;
    cv.report.check();
    return cv;
}

std::vector<AblationRow> ablate(const LabeledDataset& dataset, const RunConfig& cfg,
                                int folds_limit) {
    struct Variant {
        std::string name;
        void (*apply)(RunConfig&);
    };
    static const Variant variants[] = {
        {"without_stft", [](RunConfig& c) { c.model.use_stft = false; }},
        {"without_delta", [](RunConfig& c) { c.model.use_delta = false; }},
        {"without_raw", [](RunConfig& c) { c.model.use_waveform = false; }},
        {"without_attention", [](RunConfig& c) { c.model.attention_enabled = false; }},
        {"without_fusion", [](RunConfig& c) { c.train.fusion_eval = false; }},
        {"without_uncertainty", [](RunConfig& c) { c.train.noise_fraction = 0.0; }},
        {"without_augmentation", [](RunConfig& c) { c.train.augment = false; }},
        {"complete", [](RunConfig&) {}},
    };

    const int n_folds = dataset.num_folds();
    const int folds_to_run = folds_limit > 0 ? std::min(folds_limit, n_folds) : n_folds;

    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        RunConfig varied = cfg;
        variant.apply(varied);

        AblationRow row;
        row.name = variant.name;
        row.report.dataset = dataset.name;
        row.report.config_hash = varied.hash();
        row.report.classes = dataset.class_names;
        double acc_sum = 0.0;
        for (int fold = 0; fold < folds_to_run; ++fold) {
            auto run = train_fold(dataset, fold, varied.model, varied.train);
            acc_sum += run.metrics.accuracy;
            if (fold == 0) row.model = run.model;
            row.report.folds.push_back(std::move(run.metrics));
        }
        row.report.mean_accuracy = acc_sum / folds_to_run;
        row.report.check();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["dataset"] = report.dataset;
    j["config_hash"] = report.config_hash;
    j["classes"] = report.classes;
    j["mean_accuracy"] = report.mean_accuracy;
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& fold : report.folds) {
        nlohmann::ordered_json f;
        f["fold"] = fold.fold;
        f["accuracy"] = fold.accuracy;
        f["confusion"] = fold.confusion;
        j["folds"].push_back(std::move(f));
    }
    return j.dump(2) + "\n";
}

void write_metrics(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("metrics: cannot write " + path);
    out << metrics_to_json(report);
}

void write_confusion_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("confusion: cannot write " + path);
    out << "fold,true_class";
    for (const auto& name : report.classes) out << "," << name;
    out << "\n";
    for (const auto& fold : report.folds) {
        for (size_t t = 0; t < fold.confusion.size(); ++t) {
            out << fold.fold << "," << report.classes[t];
            for (const int v : fold.confusion[t]) out << "," << v;
            out << "\n";
        }
    }
}

void write_timing(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("timing: cannot write " + path);
    double total = 0.0;
    for (const auto& fold : report.folds) {
        out << "fold " << fold.fold << ": " << fold.wall_seconds << " s\n";
        total += fold.wall_seconds;
    }
    out << "total: " << total << " s\n";
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json r;
        r["variant"] = row.name;
        r["mean_accuracy"] = row.report.mean_accuracy;
        r["config_hash"] = row.report.config_hash;
        nlohmann::ordered_json folds = nlohmann::ordered_json::array();
        for (const auto& fold : row.report.folds) folds.push_back(fold.accuracy);
        r["fold_accuracies"] = std::move(folds);
        j.push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

} // namespace escnet::harness
