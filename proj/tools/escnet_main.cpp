// Command-line surface: dataset synthesis, feature extraction, training,
// cross-validation, component ablation, attention export, and checkpoint
// evaluation. ESCNET_THREADS caps the worker count.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "escnet/audio/resample.h"
#include "escnet/audio/synth.h"
#include "escnet/audio/wav.h"
#include "escnet/harness/attention_export.h"
#include "escnet/harness/checkpoint.h"
#include "escnet/harness/features_io.h"
#include "escnet/harness/manifest.h"
#include "escnet/harness/run_config.h"
#include "escnet/harness/trainer.h"

namespace fs = std::filesystem;
using namespace escnet;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string manifest_path;
    std::string out_dir;
    int fold = -1;
    int64_t seed = -1;
};

harness::RunConfig load_run_config(const CommonArgs& args) {
    harness::RunConfig cfg = args.config_path.empty()
        ? harness::RunConfig()
        : harness::RunConfig::from_file(args.config_path);
    if (!args.manifest_path.empty()) cfg.manifest_path = args.manifest_path;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed >= 0) cfg.train.seed = static_cast<uint64_t>(args.seed);
    return cfg;
}

harness::LabeledDataset load_dataset_for(const harness::RunConfig& cfg) {
    if (cfg.manifest_path.empty()) {
        throw ConfigError("no manifest given (use --manifest or [dataset] manifest=...)");
    }
    const auto manifest = harness::load_manifest(cfg.manifest_path);
    const auto base = fs::path(cfg.manifest_path).parent_path().string();
    return harness::load_dataset(manifest, base);
}

int cmd_synth(const CommonArgs& args) {
    auto cfg = load_run_config(args);
    if (args.seed >= 0) cfg.synth.seed = static_cast<uint64_t>(args.seed);
    if (cfg.synth.classes.empty()) {
        throw ConfigError("synth: config has no [synth] classes");
    }
    fs::create_directories(cfg.out_dir);
    const auto clips = audio::synth_dataset(cfg.synth);

    std::vector<harness::ManifestEntry> entries;
    std::map<std::string, int> per_class_index;
    for (const auto& clip : clips) {
        const std::string kind = clip.source_id.substr(0, clip.source_id.find('/'));
        const int index = per_class_index[kind]++;
        std::string file = kind + "_" + std::to_string(index) + ".wav";
        audio::write_wav_file((fs::path(cfg.out_dir) / file).string(), clip.samples,
                              clip.sample_rate);
        entries.push_back({file, kind, index % cfg.synth_folds});
    }
    const auto manifest = harness::manifest_from_entries(std::move(entries), cfg.dataset_name);
    const auto manifest_path = (fs::path(cfg.out_dir) / "manifest.csv").string();
    harness::write_manifest(manifest, manifest_path);
    std::cout << "wrote " << clips.size() << " clips and " << manifest_path << "\n";
    return 0;
}

int cmd_extract(const CommonArgs& args) {
    auto cfg = load_run_config(args);
    const auto dataset = load_dataset_for(cfg);
    fs::create_directories(cfg.out_dir);

    const int k = static_cast<int>(dataset.class_names.size());
    std::vector<dsp::FeatureTriple> triples;
    for (const auto& clip : dataset.clips) {
        std::vector<float> target(static_cast<size_t>(k), 0.0f);
        target[static_cast<size_t>(clip.label)] = 1.0f;
        for (const auto& segment : audio::chunk_segments(clip)) {
            triples.push_back(dsp::featurize(segment, target));
        }
    }
    harness::write_features(triples, k, (fs::path(cfg.out_dir) / "features.bin").string(),
                            (fs::path(cfg.out_dir) / "features.json").string(), dataset.name,
                            cfg.hash());
    std::cout << "wrote " << triples.size() << " feature records\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    auto cfg = load_run_config(args);
    if (args.fold < 0) throw ConfigError("train: --fold is required");
    const auto dataset = load_dataset_for(cfg);
    fs::create_directories(cfg.out_dir);

    auto run = harness::train_fold(dataset, args.fold, cfg.model, cfg.train);

    harness::MetricsReport report;
    report.dataset = dataset.name;
    report.config_hash = cfg.hash();
    report.classes = dataset.class_names;
    report.mean_accuracy = run.metrics.accuracy;
    report.folds.push_back(run.metrics);
    report.check();

    harness::write_metrics(report, (fs::path(cfg.out_dir) / "metrics.json").string());
    harness::write_confusion_csv(report, (fs::path(cfg.out_dir) / "confusion.csv").string());
    harness::write_timing(report, (fs::path(cfg.out_dir) / "timing.txt").string());
    harness::save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.bin").string(), *run.model,
                             nullptr, cfg.train.epochs);
    std::cout << "fold " << args.fold << " accuracy " << run.metrics.accuracy << " ("
              << run.metrics.wall_seconds << " s)\n";
    return 0;
}

int cmd_cv(const CommonArgs& args) {
    auto cfg = load_run_config(args);
    const auto dataset = load_dataset_for(cfg);
    fs::create_directories(cfg.out_dir);

    auto cv = harness::cross_validate(dataset, cfg);
    harness::write_metrics(cv.report, (fs::path(cfg.out_dir) / "metrics.json").string());
    harness::write_confusion_csv(cv.report, (fs::path(cfg.out_dir) / "confusion.csv").string());
    harness::write_timing(cv.report, (fs::path(cfg.out_dir) / "timing.txt").string());
    for (size_t f = 0; f < cv.fold_models.size(); ++f) {
        harness::save_checkpoint(
            (fs::path(cfg.out_dir) / ("checkpoint_fold" + std::to_string(f) + ".bin")).string(),
            *cv.fold_models[f], nullptr, cfg.train.epochs);
    }
    std::cout << "mean accuracy " << cv.report.mean_accuracy << " over "
              << cv.report.folds.size() << " folds\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args, int folds_limit) {
    auto cfg = load_run_config(args);
    const auto dataset = load_dataset_for(cfg);
    fs::create_directories(cfg.out_dir);

    const auto rows = harness::ablate(dataset, cfg, folds_limit);
    std::ofstream out(fs::path(cfg.out_dir) / "ablation.json");
    out << harness::ablation_to_json(rows);
    std::cout << "variant                mean accuracy\n";
    for (const auto& row : rows) {
        std::cout << row.name;
        for (size_t pad = row.name.size(); pad < 23; ++pad) std::cout << ' ';
        std::cout << row.report.mean_accuracy << "\n";
    }
    return 0;
}

int cmd_attention(const std::string& checkpoint_path, const std::string& wav_path,
                  const std::string& csv_path) {
    auto loaded = harness::load_checkpoint(checkpoint_path);
    auto clip = audio::read_wav_file(wav_path);
    clip = audio::resample(clip, audio::kCanonicalRate);
    harness::export_attention(clip, *loaded.model, csv_path);
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path) {
    auto cfg = load_run_config(args);
    const auto dataset = load_dataset_for(cfg);
    fs::create_directories(cfg.out_dir);
    auto loaded = harness::load_checkpoint(checkpoint_path);

    const int k = loaded.model->config().num_classes;
    if (k != static_cast<int>(dataset.class_names.size())) {
        throw ConfigError("eval: checkpoint expects " + std::to_string(k) + " classes");
    }
    harness::FoldResult result;
    result.fold = args.fold;
    result.confusion.assign(static_cast<size_t>(k), std::vector<int>(static_cast<size_t>(k), 0));
    long correct = 0, total = 0;
    for (size_t i = 0; i < dataset.clips.size(); ++i) {
        if (args.fold >= 0 && dataset.folds[i] != args.fold) continue;
        const auto& clip = dataset.clips[i];
        const auto [predicted, posterior] =
            augment::classify_clip(clip, *loaded.model, cfg.train.fusion_eval);
        (void)posterior;
        ++total;
        if (predicted == clip.label) ++correct;
        ++result.confusion[static_cast<size_t>(clip.label)][static_cast<size_t>(predicted)];
    }
    if (total == 0) throw ConfigError("eval: no clips selected");
    result.accuracy = static_cast<double>(correct) / total;

    harness::MetricsReport report;
    report.dataset = dataset.name;
    report.config_hash = cfg.hash();
    report.classes = dataset.class_names;
    report.folds.push_back(result);
    report.mean_accuracy = result.accuracy;
    report.check();
    harness::write_metrics(report, (fs::path(cfg.out_dir) / "metrics.json").string());
    harness::write_confusion_csv(report, (fs::path(cfg.out_dir) / "confusion.csv").string());
    std::cout << "accuracy " << result.accuracy << " on " << total << " clips\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-stream environmental sound classifier"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_path, wav_path, csv_path;
    int ablate_folds = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "run configuration file");
        cmd->add_option("--manifest", args.manifest_path, "dataset manifest CSV");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "seed override");
        cmd->add_option("--fold", args.fold, "fold id");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset and manifest");
    add_common(synth);
    auto* extract = app.add_subcommand("extract", "dump per-window feature triples");
    add_common(extract);
    auto* train = app.add_subcommand("train", "train one fold");
    add_common(train);
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
    add_common(cv);
    auto* ablate = app.add_subcommand("ablate", "component-contribution study");
    add_common(ablate);
    ablate->add_option("--folds-limit", ablate_folds, "folds per variant (0 = all)");
    auto* attention = app.add_subcommand("attention", "export attention curves for a clip");
    add_common(attention);
    attention->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    attention->add_option("--in", wav_path, "input WAV file")->required();
    attention->add_option("--csv", csv_path, "output CSV path")->required();
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(args);
        if (extract->parsed()) return cmd_extract(args);
        if (train->parsed()) return cmd_train(args);
        if (cv->parsed()) return cmd_cv(args);
        if (ablate->parsed()) return cmd_ablate(args, ablate_folds);
        if (attention->parsed()) return cmd_attention(checkpoint_path, wav_path, csv_path);
        if (eval->parsed()) return cmd_eval(args, checkpoint_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
