#pragma once

#include <string>
#include <vector>

#include "eclf/classifier.hpp"
#include "eclf/explainer.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/vae.hpp"

namespace eclf {

/// Everything a CLI run needs, grouped by command-scoped sections. The text
/// form is line-oriented `section.key = value`; unknown keys are rejected
/// by name, arrays are comma-separated.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_root;  // empty: $ECLF_OUT_ROOT or "runs"

    // data.*
    DatasetSpec data;
    std::string data_path;  // dataset directory produced by gen-data/ingest

    // vae.*
    double vae_alpha = 0.05;
    double vae_epsilon_d = 5.0;
    double vae_epsilon_s = 2.0;
    double vae_beta = 4.0;
    double vae_gamma = 1.0;
    bool vae_class_specific = false;
    int vae_cfv_dim = 8;
    int vae_ncfv_dim = 8;
    int vae_cfvs1_dim = 4;
    int vae_cfvs2_dim = 4;
    int vae_batch_size = 16;
    std::int64_t vae_iterations = 2000;
    std::int64_t vae_pretrain_iterations = 0;
    std::int64_t vae_warmup_start = -1;
    std::int64_t vae_warmup_end = -1;
    double vae_learning_rate = 1e-3;
    double vae_disc_learning_rate = 0.0;
    std::string vae_tying = "mirrored";
    std::string vae_arch = "desk";
    std::int64_t vae_log_interval = 50;
    std::int64_t vae_checkpoint_interval = 0;
    std::string vae_selection = "best";
    int vae_discriminator_updates = 2;
    bool vae_cs_supportive = true;
    std::string vae_resume;      // checkpoint to continue from
    std::string vae_checkpoint;  // trained checkpoint consumed by later stages

    // classifier.*
    std::int64_t cls_iterations = 5000;
    int cls_batch_size = 32;
    double cls_learning_rate = 1e-3;
    std::int64_t cls_eval_interval = 100;
    bool cls_baseline = true;  // also train the pixel baseline during eval
    std::int64_t baseline_iterations = 1200;
    std::string cls_checkpoint;  // trained classifier consumed by later stages

    // explain.*
    int explain_query_index = 0;
    int explain_class_a = -1;
    int explain_class_b = -1;
    int explain_k_neighbors = 10;
    int explain_pair_budget = 500;
    std::vector<double> explain_k_grid = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    int explain_top_n = -1;
    int explain_coarse_steps = 64;
    double explain_tau_rel = 1e-3;
    int explain_retry_factor = 20;

    // sweep.*
    std::string sweep_axis = "beta";
    std::vector<double> sweep_values = {1.0, 4.0, 16.0};
    std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};

    LatentLayout latent_layout() const;
    TrainingConfig training_config() const;
    ClassifierConfig classifier_config() const;
    BaselineConfig baseline_config() const;
    ExplanationQuery explanation_query() const;
    std::string resolved_out_root() const;
};

/// One line per key with its documented default.
std::string serialize_config(const RunConfig& cfg);

/// Parses `section.key = value` text over the defaults. Unknown keys and
/// unparseable values raise errors naming the key.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Applies one override; the CLI maps `--section.key value` here.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

/// Key listing with docs, for --help output.
std::string config_reference();

}  // namespace eclf
