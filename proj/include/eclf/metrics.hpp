#pragma once

#include <string>
#include <vector>

#include "eclf/classifier.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/vae.hpp"

namespace eclf {

/// Equal-weight Gaussian mixture in up to 3 dimensions. Components carry
/// per-dimension variances; 2-D components may add a correlation.
struct MixtureComponent {
    std::vector<double> mean;
    std::vector<double> var;
    double rho = 0.0;  // 2-D only

    void validate(int dims) const;
};

struct GaussianMixture {
    std::vector<MixtureComponent> components;

    int dims() const;
    void validate() const;
    double log_density(const std::vector<double>& x) const;
    double log_marginal(int dim, double x) const;
    std::vector<double> sample(Rng& rng) const;

    /// Aggregate of a set of diagonal posteriors (one component each).
    static GaussianMixture from_posteriors(const PosteriorBatch& post);
};

/// Grid quadrature of KL(q || prod_j q_j) over [-8, 8]^d. 1024 points per
/// axis for <= 2 dims, 160 for 3 dims.
double tc_oracle(const GaussianMixture& q);

/// Monte-Carlo estimate of the same integral, for cross-checking.
double tc_monte_carlo(const GaussianMixture& q, std::int64_t samples, Rng& rng);

struct DecompositionResult {
    double lhs = 0;        // closed-form mean KL(q(z|n) || p(z))
    double rhs = 0;        // index_mi + tc + dkl via the minibatch estimator
    double index_mi = 0, tc = 0, dkl = 0;
    double residual = 0;   // |lhs - rhs|
};

/// Checks the three-way decomposition identity on a frozen model over the
/// posteriors of `idx`, averaging the estimator over fresh z draws until
/// roughly `samples` per-posterior samples have been used.
DecompositionResult decomposition_check(const VaeModel& model, const Dataset& ds,
                                        const std::vector<int>& idx, std::int64_t samples,
                                        std::uint64_t seed);

/// Same check on raw posterior parameters (no model required).
DecompositionResult decomposition_check_posteriors(const PosteriorBatch& post, std::int64_t samples,
                                                   std::uint64_t seed);

/// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// |Spearman| between every ground-truth factor (rows) and latent dimension
/// (columns) over a probe set.
struct AlignmentMatrix {
    std::vector<std::string> factor_names;
    int latent_dims = 0;
    std::vector<double> scores;  // rows x cols, |rank correlation|

    double at(int factor, int dim) const { return scores[static_cast<std::size_t>(factor) * latent_dims + dim]; }
    int best_factor_for(int dim) const;
    double best_score_for(int factor) const;
    std::string to_csv() const;
};

AlignmentMatrix factor_alignment(const Tensor& latent_means, const std::vector<FactorRecord>& records);

enum class SweepAxis { beta, latent_dim };

struct SweepCell {
    SweepAxis axis;
    double value = 0;
    std::uint64_t seed = 0;
    double tc = 0, l_rc = 0, accuracy = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;

    /// Sign of the rank trend for one seed: spearman(value, metric).
    double trend(std::uint64_t seed, const char* metric) const;
};

std::string sweep_csv(const SweepResult& r);

/// Trains one VAE + final classifier per (value, seed) cell and records
/// validation tc and l_rc at the selected snapshot plus test accuracy.
SweepResult run_sweep(SweepAxis axis, const std::vector<double>& values,
                      const std::vector<std::uint64_t>& seeds, const Dataset& ds,
                      const TrainingConfig& base, const ClassifierConfig& cls_cfg);

}  // namespace eclf
