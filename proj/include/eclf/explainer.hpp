#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eclf/classifier.hpp"
#include "eclf/image.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/vae.hpp"

namespace eclf {

using FeatureVec = std::vector<real>;

/// Query posterior restricted to the classifiable feature slice.
struct FeaturePosterior {
    FeatureVec mu, log_var;
};

struct ExplanationQuery {
    int class_a = -1;  // -1: the classifier's maximum-likelihood class
    int class_b = -1;  // -1: the second-highest logit
    int k_neighbors = 10;
    int pair_budget = 500;  // boundary pairs; two fit points each
    std::vector<double> k_grid = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    int top_n = -1;  // -1: min(10, feature dim)
    int coarse_steps = 64;
    double tau_rel = 1e-3;   // bisection tolerance relative to |A - B|
    int retry_factor = 20;   // attempt cap = retry_factor * pair_budget
    std::uint64_t seed = 1;

    void validate() const;
};

/// Latent points straddling the classifier's local decision boundary.
struct BoundaryPair {
    FeatureVec a, b;       // class-A side, class-B side
    double gap_a = 0;      // logit_A - logit_B at a
    double gap_b = 0;      // at b
};

struct LinearSurrogate {
    Tensor weights;            // [2, F); row 0 approximates class A's logit
    std::vector<real> bias;    // length 2
    double fit_mse = 0;        // held-out, mean over both outputs
    double gap_mse = 0;        // held-out, on the logit gap
    double gap_variance = 0;   // held-out variance of the target gap
    double sign_agreement = 0; // held-out decision agreement
};

struct ImportanceReport {
    std::vector<double> im;    // W_A (CFV_a - CFV_b), elementwise
    std::vector<int> ranking;  // |im| descending, index tie-break
    BoundaryPair pair_used;
};

struct TraversalStrip {
    std::string anchor;         // "A_to_B" or "a_to_b"
    std::vector<int> features;  // varied feature indices
    FeatureVec origin, target;  // interpolation endpoints in feature space
    std::vector<Image> frames;  // one per k-grid value
    Image mask;                 // change mask between first and last frame
    int source = 0;             // class-specific slice of features[0]
};

struct ExplanationReport {
    std::string mode;  // "eclf" or "eclf-cs"
    int query_index = -1;
    int class_a = 0, class_b = 0;
    std::vector<real> query_logits;
    std::vector<double> k_grid;
    ImportanceReport importance;
    LinearSurrogate surrogate;
    std::vector<int> feature_sources;  // slice tag per feature index
    std::vector<TraversalStrip> strips;
    int pairs_generated = 0;
    int attempts = 0;
};

/// K nearest rows of `candidates` to `query` by Euclidean distance; equal
/// distances resolve to the lower row index.
std::vector<int> knearest(const FeatureVec& query, const Tensor& candidates, int k);

/// Point (A): one draw from the query posterior. Point (B): the mean of one
/// draw from each neighbor posterior.
std::pair<FeatureVec, FeatureVec> sample_points(const FeaturePosterior& query_post,
                                                const std::vector<FeaturePosterior>& neighbors,
                                                Rng& rng);

using LogitsFn = std::function<std::vector<real>(const FeatureVec&)>;

/// Walks the segment point_a -> point_b with a coarse scan then bisection.
/// Returns the pair straddling the boundary within tau_rel * |A - B|, or
/// nothing when the B side does not classify as class_b (NotCrossing).
std::optional<BoundaryPair> cross_boundary(const FeatureVec& point_a, const FeatureVec& point_b,
                                           int class_a, int class_b, const LogitsFn& logits,
                                           int coarse_steps, double tau_rel);

/// Least-squares fit of the two contrast-class logits over boundary-adjacent
/// points; every fifth point is held out for the diagnostics. Rank-deficient
/// designs fall back to a small ridge.
LinearSurrogate fit_surrogate(const std::vector<FeatureVec>& points, const Tensor& targets);

/// IM = W_A  (CFV_a - CFV_b), elementwise; no normalization.
std::vector<double> importance(const std::vector<real>& w_a, const FeatureVec& cfv_a,
                               const FeatureVec& cfv_b);

/// Ranking by |IM| descending with ascending-index tie-break.
std::vector<int> importance_ranking(const std::vector<double>& im);

/// cf_AI = cf_A - (cf_A - cf_BM) * k on the selected indices only.
FeatureVec interpolate(const FeatureVec& origin, const FeatureVec& target,
                       const std::vector<int>& selected, double k);

/// Per-pixel channel-summed absolute difference, thresholded at the
/// nearest-rank 80th percentile; zero-difference pixels never mask.
Image change_mask(const Image& frame_a, const Image& frame_b);

/// The full pipeline: predict, contrast selection, pair generation to the
/// budget, surrogate, Eq-style importances, traversal strips from both
/// anchors, change masks. Works identically for plain and class-specific
/// layouts; the latter zero-gates the inactive slice when rendering.
ExplanationReport explain(const VaeModel& model, const ClassifierModel& classifier,
                          const Dataset& ds, int query_sample_index, const ExplanationQuery& query);

/// Writes strips and masks as PNGs plus a structured-text manifest.
void write_report(const ExplanationReport& report, const std::string& dir);

}  // namespace eclf
