#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eclf/checkpoint.hpp"
#include "eclf/optim.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/vae.hpp"

namespace eclf {

struct MetricRow {
    std::int64_t iteration = 0;
    LossBreakdown losses;
};

std::string metric_csv_header();
std::string metric_csv(const std::vector<MetricRow>& rows);

struct TrainResult {
    Checkpoint checkpoint;  // final state: resume-able, includes best snapshot
    std::vector<MetricRow> log;
    bool diverged = false;
    double best_score = 0.0;
    std::int64_t best_iteration = 0;
    double initial_val_lrc = 0.0;
    double final_val_lrc = 0.0;
};

Tensor images_to_batch(const Dataset& ds, const std::vector<int>& idx);
std::vector<int> labels_of(const Dataset& ds, const std::vector<int>& idx);

/// Runs the staged training protocol: optional reconstruction-only lead-in,
/// then the full objective with the discriminator updated before the
/// encoder/decoder/supportive step each iteration, with the warmup ramp on
/// the perceptual, TC and DKL terms. In class-specific mode every decode
/// during training gates the latent by the ground-truth class.
class Trainer {
public:
    Trainer(const Dataset& ds, TrainingConfig cfg);
    Trainer(const Dataset& ds, const Checkpoint& resume_from);

    /// Trains to the configured budget, or to `until` when non-negative
    /// (an interrupted run; resume later from the returned checkpoint).
    /// When `run_dir` is nonempty and a checkpoint cadence is configured,
    /// periodic checkpoints land there.
    TrainResult run(const std::string& run_dir = "", std::int64_t until = -1);

    /// One alternating update (discriminator, then encoder/decoder/sup).
    LossBreakdown step();

    /// Full objective on a fixed batch and noise draw; pure unless
    /// `accumulate_grads`. Exposed for gradient checking.
    LossBreakdown compute_losses(const Tensor& x, const std::vector<int>& labels, const Tensor& noise,
                                 double warm, bool accumulate_grads);

    /// ReLU mask hash for the whole objective graph at (x, labels, noise).
    std::uint64_t graph_mask_signature(const Tensor& x, const std::vector<int>& labels,
                                       const Tensor& noise);

    LossBreakdown validation_losses();

    VaeModel& model() { return *model_; }
    const VaeModel& model() const { return *model_; }
    Optimizer<real>& optimizer() { return opt_; }
    std::int64_t iteration() const { return iter_; }
    const TrainingConfig& config() const { return cfg_; }

    Checkpoint make_checkpoint() const;

private:
    void init_from_config(TrainingConfig cfg);
    void load_state(const Checkpoint& ckpt);
    void snapshot_best(double score);
    double current_warm() const;
    bool in_pretrain() const { return iter_ < cfg_.pretrain_iterations; }

    const Dataset& ds_;
    TrainingConfig cfg_;
    std::unique_ptr<VaeModel> model_;
    PerceptualExtractor extractor_;
    Optimizer<real> opt_;
    Optimizer<real> disc_opt_;
    Rng rng_;
    std::int64_t iter_ = 0;

    std::vector<MetricRow> log_;
    std::vector<Tensor> best_params_;
    double best_score_ = 0.0;
    std::int64_t best_iteration_ = 0;
    bool has_best_ = false;
    bool diverged_ = false;
};

/// Rebuilds the model from a checkpoint, honoring the configured snapshot
/// selection (best-validation weights when present, else final).
VaeModel load_model(const Checkpoint& ckpt);

}  // namespace eclf
