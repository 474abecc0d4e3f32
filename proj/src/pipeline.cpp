#include "eclf/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "eclf/metrics.hpp"
#include "eclf/trainer.hpp"

namespace fs = std::filesystem;

namespace eclf {

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

Dataset load_stage_dataset(const RunConfig& cfg) {
    require(!cfg.data_path.empty(),
            "missing artifact: data.path (run gen-data or ingest first and point data.path at the "
            "dataset directory)");
    require(fs::exists(fs::path(cfg.data_path) / "manifest.txt"),
            "missing artifact: no dataset manifest under '" + cfg.data_path + "'");
    return load_dataset(cfg.data_path);
}

Checkpoint load_stage_vae(const RunConfig& cfg) {
    require(!cfg.vae_checkpoint.empty(),
            "missing artifact: vae.checkpoint (run train-vae first and point vae.checkpoint at "
            "vae.ckpt)");
    require(fs::exists(cfg.vae_checkpoint),
            "missing artifact: VAE checkpoint '" + cfg.vae_checkpoint + "' does not exist");
    return load_checkpoint(cfg.vae_checkpoint);
}

ClassifierModel load_stage_classifier(const RunConfig& cfg) {
    require(!cfg.cls_checkpoint.empty(),
            "missing artifact: classifier.checkpoint (run train-cls first and point "
            "classifier.checkpoint at cls.ckpt)");
    require(fs::exists(cfg.cls_checkpoint),
            "missing artifact: classifier checkpoint '" + cfg.cls_checkpoint + "' does not exist");
    return classifier_from_checkpoint(load_checkpoint(cfg.cls_checkpoint));
}

void write_accuracy_csv(const std::string& path, const std::string& dataset,
                        const std::vector<std::tuple<std::string, std::string, double>>& rows,
                        std::uint64_t seed) {
    std::ostringstream ss;
    ss << "dataset,model,split,accuracy,seed\n";
    for (const auto& [model, split, acc] : rows)
        ss << dataset << "," << model << "," << split << "," << fmt_real(acc) << "," << seed << "\n";
    write_text_file(path, ss.str());
}

}  // namespace

std::string make_run_dir(const std::string& out_root, const std::string& command,
                         std::uint64_t seed) {
    fs::create_directories(out_root);
    const std::string base = command + "-" + timestamp() + "-" + std::to_string(seed);
    fs::path dir = fs::path(out_root) / base;
    for (int n = 1; fs::exists(dir); ++n) dir = fs::path(out_root) / (base + "-" + std::to_string(n));
    fs::create_directories(dir);
    return dir.string();
}

std::string run_command(const std::string& command, const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    cfg.data.master_seed = cfg.seed;
    const std::string run_dir = make_run_dir(cfg.resolved_out_root(), command, cfg.seed);
    write_text_file((fs::path(run_dir) / "config.txt").string(), serialize_config(cfg));

    if (command == "gen-data") {
        const Dataset ds = generate_dataset(cfg.data);
        save_dataset(ds, (fs::path(run_dir) / "dataset").string());
        std::cout << "dataset: " << (fs::path(run_dir) / "dataset").string() << " ("
                  << ds.samples.size() << " samples, " << ds.num_classes() << " classes)\n";
    } else if (command == "ingest") {
        DatasetSpec spec = cfg.data;
        spec.preset = DataPreset::folder;
        spec.validate();
        const Dataset ds = ingest_folder(spec.folder_root, spec);
        save_dataset(ds, (fs::path(run_dir) / "dataset").string());
        std::cout << "dataset: " << (fs::path(run_dir) / "dataset").string() << " ("
                  << ds.samples.size() << " samples, " << ds.num_classes() << " classes)\n";
    } else if (command == "train-vae") {
        const Dataset ds = load_stage_dataset(cfg);
        TrainResult result;
        if (!cfg.vae_resume.empty()) {
            require(fs::exists(cfg.vae_resume),
                    "missing artifact: resume checkpoint '" + cfg.vae_resume + "' does not exist");
            Trainer trainer(ds, load_checkpoint(cfg.vae_resume));
            result = trainer.run(run_dir);
        } else {
            TrainingConfig tc = cfg.training_config();
            tc.image_size = ds.image_size;
            Trainer trainer(ds, tc);
            result = trainer.run(run_dir);
        }
        save_checkpoint(result.checkpoint, (fs::path(run_dir) / "vae.ckpt").string());
        write_text_file((fs::path(run_dir) / "metrics.csv").string(), metric_csv(result.log));
        std::cout << "checkpoint: " << (fs::path(run_dir) / "vae.ckpt").string() << "\n";
        std::cout << "metrics: " << (fs::path(run_dir) / "metrics.csv").string() << "\n";
        std::cout << "validation l_rc " << result.initial_val_lrc << " -> " << result.final_val_lrc
                  << (result.diverged ? " (diverged; last good snapshot kept)" : "") << "\n";
        require(!result.diverged, "training diverged");
    } else if (command == "train-cls") {
        const Dataset ds = load_stage_dataset(cfg);
        const VaeModel model = load_model(load_stage_vae(cfg));
        const FeatureSet train = extract_features(model, ds, SplitKind::train);
        const FeatureSet val = extract_features(model, ds, SplitKind::val);
        const ClassifierModel cls = train_final(train, val, cfg.classifier_config());
        save_checkpoint(classifier_checkpoint(cls), (fs::path(run_dir) / "cls.ckpt").string());
        std::cout << "checkpoint: " << (fs::path(run_dir) / "cls.ckpt").string() << "\n";
        std::cout << "best validation accuracy " << cls.best_val_accuracy << " at iteration "
                  << cls.best_iteration << "\n";
    } else if (command == "explain") {
        const Dataset ds = load_stage_dataset(cfg);
        const VaeModel model = load_model(load_stage_vae(cfg));
        const ClassifierModel cls = load_stage_classifier(cfg);
        const ExplanationReport report =
            explain(model, cls, ds, cfg.explain_query_index, cfg.explanation_query());
        write_report(report, (fs::path(run_dir) / "report").string());
        std::cout << "report: " << (fs::path(run_dir) / "report").string() << "\n";
        std::cout << "mode " << report.mode << ", class " << report.class_a << " vs "
                  << report.class_b << ", top feature "
                  << report.importance.ranking.front() << ", sign agreement "
                  << report.surrogate.sign_agreement << "\n";
    } else if (command == "eval") {
        const Dataset ds = load_stage_dataset(cfg);
        const VaeModel model = load_model(load_stage_vae(cfg));
        const ClassifierModel cls = load_stage_classifier(cfg);
        const FeatureSet val = extract_features(model, ds, SplitKind::val);
        const FeatureSet test = extract_features(model, ds, SplitKind::test);
        std::vector<std::tuple<std::string, std::string, double>> rows;
        const std::string mode = model.layout().is_class_specific() ? "eclf-cs" : "eclf";
        rows.emplace_back(mode, "val", accuracy(cls, val));
        rows.emplace_back(mode, "test", accuracy(cls, test));
        if (cfg.cls_baseline) {
            const BaselineResult base = train_baseline(ds, cfg.baseline_config());
            rows.emplace_back("baseline", "val", base.val_accuracy);
            rows.emplace_back("baseline", "test", base.test_accuracy);
        }
        const std::string dataset_name =
            cfg.data.preset == DataPreset::folder ? cfg.data.folder_root : preset_name(cfg.data.preset);
        write_accuracy_csv((fs::path(run_dir) / "accuracy.csv").string(), dataset_name, rows,
                           cfg.seed);
        std::cout << "accuracy: " << (fs::path(run_dir) / "accuracy.csv").string() << "\n";
        for (const auto& [m, s, a] : rows) std::cout << "  " << m << " " << s << " " << a << "\n";

        std::ostringstream summary;
        summary << "dataset = " << dataset_name << "\n";
        summary << "seed = " << cfg.seed << "\n";
        for (const auto& [m, s, a] : rows)
            summary << "accuracy." << m << "." << s << " = " << fmt_real(a) << "\n";

        // factor-latent alignment is only defined for synthetic data
        bool have_factors = !ds.test_idx.empty();
        for (int i : ds.test_idx) have_factors &= ds.samples[static_cast<std::size_t>(i)].factors.has_value();
        if (have_factors) {
            const Tensor xt = images_to_batch(ds, ds.test_idx);
            const PosteriorBatch post = model.encode(xt);
            std::vector<FactorRecord> recs;
            for (int i : ds.test_idx) recs.push_back(*ds.samples[static_cast<std::size_t>(i)].factors);
            const AlignmentMatrix am = factor_alignment(post.mu, recs);
            write_text_file((fs::path(run_dir) / "alignment.csv").string(), am.to_csv());
            for (std::size_t f = 0; f < am.factor_names.size(); ++f)
                summary << "alignment." << am.factor_names[f] << " = "
                        << fmt_real(am.best_score_for(static_cast<int>(f))) << "\n";
            std::cout << "alignment: " << (fs::path(run_dir) / "alignment.csv").string() << "\n";
        }
        write_text_file((fs::path(run_dir) / "summary.txt").string(), summary.str());
    } else if (command == "sweep") {
        const Dataset ds = load_stage_dataset(cfg);
        const SweepAxis axis = cfg.sweep_axis == "beta" ? SweepAxis::beta : SweepAxis::latent_dim;
        TrainingConfig base = cfg.training_config();
        base.image_size = ds.image_size;
        const SweepResult result =
            run_sweep(axis, cfg.sweep_values, cfg.sweep_seeds, ds, base, cfg.classifier_config());
        write_text_file((fs::path(run_dir) / "sweep.csv").string(), sweep_csv(result));
        std::cout << "sweep: " << (fs::path(run_dir) / "sweep.csv").string() << "\n";
        for (std::uint64_t seed : result.seeds)
            std::cout << "  seed " << seed << ": spearman(value, tc) = " << result.trend(seed, "tc")
                      << ", spearman(value, l_rc) = " << result.trend(seed, "l_rc") << "\n";
    } else {
        throw std::runtime_error("unknown command '" + command + "'");
    }
    return run_dir;
}

}  // namespace eclf
