#pragma once

#include <string>
#include <vector>

#include "eclf/checkpoint.hpp"
#include "eclf/heads.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/vae.hpp"

namespace eclf {

struct FeatureSet {
    Tensor features;  // [N, F]
    std::vector<int> labels;
    int n() const { return features.dim(0); }
    int dim() const { return features.dim(1); }
};

/// Posterior means of the classifiable slice (CFV, or merged CFVS) for one
/// split; no sampling noise.
FeatureSet extract_features(const VaeModel& model, const Dataset& ds, SplitKind split);

/// Posterior means of the NCFV slice; used by leakage probes.
FeatureSet extract_ncfv_features(const VaeModel& model, const Dataset& ds, SplitKind split);

struct ClassifierConfig {
    std::int64_t iterations = 5000;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    std::int64_t eval_interval = 100;
};

/// The final nonlinear classifier: the same 3-layer fully connected family
/// as the supportive head, trained on frozen-encoder features.
class ClassifierModel {
public:
    ClassifierModel() = default;
    ClassifierModel(int input_dim, int classes, std::uint64_t seed);

    struct Prediction {
        int cls = 0;
        std::vector<real> logits;
        std::vector<real> probs;
    };

    Prediction predict(const std::vector<real>& feature) const;
    Tensor logits(const Tensor& features) const;  // [N, C]
    std::vector<int> classify(const Tensor& features) const;

    int input_dim() const { return input_dim_; }
    int classes() const { return classes_; }

    ParamStore<real>& store() { return store_; }
    const ParamStore<real>& store() const { return store_; }
    Net<real>& net() { return net_; }
    const Net<real>& net() const { return net_; }

    std::int64_t best_iteration = 0;
    double best_val_accuracy = 0.0;

private:
    int input_dim_ = 0, classes_ = 0;
    ParamStore<real> store_;
    Net<real> net_;
};

/// Trains on the train features, returning the snapshot with the best
/// validation accuracy inside the budget.
ClassifierModel train_final(const FeatureSet& train, const FeatureSet& val,
                            const ClassifierConfig& cfg);

double accuracy(const ClassifierModel& model, const FeatureSet& set);

Checkpoint classifier_checkpoint(const ClassifierModel& model);
ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt);

/// Compact convolutional classifier trained directly on pixels; the
/// accuracy-parity baseline.
struct BaselineConfig {
    std::int64_t iterations = 1200;
    int batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    std::int64_t eval_interval = 100;
};

struct BaselineResult {
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
};

BaselineResult train_baseline(const Dataset& ds, const BaselineConfig& cfg);

}  // namespace eclf
