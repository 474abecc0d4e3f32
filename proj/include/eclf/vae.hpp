#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "eclf/image.hpp"
#include "eclf/nn.hpp"
#include "eclf/rng.hpp"

namespace eclf {

struct Range {
    int begin = 0, end = 0;
    int size() const { return end - begin; }
    bool contains(int i) const { return i >= begin && i < end; }
};

/// Partition of the latent vector. Plain mode splits into [CFV, NCFV];
/// class-specific mode into [CFVS1, NCFV, CFVS2].
struct LatentLayout {
    int total_dim = 0;
    Range cfv, ncfv;
    std::optional<Range> cfvs1, cfvs2;

    static LatentLayout plain(int cfv_dim, int ncfv_dim);
    static LatentLayout class_specific(int cfvs1_dim, int ncfv_dim, int cfvs2_dim);

    bool is_class_specific() const { return cfvs1.has_value(); }
    void validate() const;

    /// Latent indices fed to classification heads: the CFV range, or
    /// CFVS1 followed by CFVS2 in class-specific mode.
    std::vector<int> classifiable_indices() const;
    int classifiable_dim() const;

    std::string to_text() const;
    static LatentLayout from_text(const std::string& s);
};

/// Per-sample Gaussian posterior parameters.
struct GaussianPosterior {
    std::vector<real> mu, log_var;
};

/// Batch of posteriors, mu/log_var shaped [N, D].
struct PosteriorBatch {
    Tensor mu, log_var;
    int n() const { return mu.dim(0); }
    int d() const { return mu.dim(1); }
    GaussianPosterior row(int i) const;
};

enum class WeightTying { mirrored, tied };
enum class ArchPreset { desk, paper };
enum class SnapshotSelection { best_loss, final_iteration };

/// Coefficients and schedule for the full training objective
///   total = l_rc + warm*alpha*l_rd + eps_d*l_d + eps_s*l_s
///           + warm*beta*tc + warm*gamma*dkl
struct TrainingConfig {
    double alpha = 0.05;
    double epsilon_d = 1.0;   // adversarial weight
    double epsilon_s = 0.5;   // supportive weight (warned if >= epsilon_d)
    double beta = 4.0;
    double gamma = 1.0;

    LatentLayout layout = LatentLayout::plain(8, 8);
    int num_classes = 2;
    int batch_size = 16;
    std::int64_t dataset_size = 0;  // M for the aggregate estimator; 0 = use train split size
    std::int64_t iterations = 2000;
    std::int64_t pretrain_iterations = 0;  // reconstruction-only lead-in
    std::int64_t warmup_start = -1;        // -1: 8% of budget
    std::int64_t warmup_end = -1;          // -1: 9.33% of budget
    double learning_rate = 1e-3;
    double disc_learning_rate = 0.0;  // 0: same as learning_rate
    std::uint64_t seed = 1;
    WeightTying tying = WeightTying::mirrored;
    ArchPreset arch = ArchPreset::desk;
    int image_size = 32;
    std::int64_t log_interval = 50;
    std::int64_t checkpoint_interval = 0;  // 0 = only final
    SnapshotSelection selection = SnapshotSelection::best_loss;
    int discriminator_updates = 1;  // per encoder update
    bool cs_supportive = true;      // supportive head in class-specific mode

    std::int64_t resolved_warmup_start() const;
    std::int64_t resolved_warmup_end() const;
    void validate() const;  // throws on hard errors, warns on eps ordering

    std::string to_text() const;
    static TrainingConfig from_text(const std::string& s);
};

struct LossBreakdown {
    double l_rc = 0, l_rd = 0, l_d = 0, l_s = 0;
    double index_mi = 0, tc = 0, dkl = 0;
    double total = 0;

    /// The objective as an exact arithmetic identity over the parts.
    static double combine(double l_rc, double l_rd, double l_d, double l_s, double tc, double dkl,
                          const TrainingConfig& cfg, double warm) {
        return l_rc + warm * cfg.alpha * l_rd + cfg.epsilon_d * l_d + cfg.epsilon_s * l_s +
               warm * cfg.beta * tc + warm * cfg.gamma * dkl;
    }
    double recombine(const TrainingConfig& cfg, double warm) const {
        return combine(l_rc, l_rd, l_d, l_s, tc, dkl, cfg, warm);
    }
};

/// Linear ramp: 0 before start, 1 after end.
double warmup(std::int64_t iter, std::int64_t start, std::int64_t end);

/// z = mu + exp(log_var / 2) * noise
Tensor reparameterize(const PosteriorBatch& post, const Tensor& noise);

/// Reconstruction loss: squared error summed over pixels, mean over batch.
double recon_loss(const Tensor& x, const Tensor& x_prime, Tensor* dx_prime = nullptr);

struct KlTerms {
    double index_mi = 0, tc = 0, dkl = 0;
};

/// Minibatch estimate of the three KL components over the aggregate
/// posterior, from one z sample per batch posterior. Uses exact inclusion
/// weights: the sample's own posterior gets weight 1/M, every other batch
/// member (M-1)/(M*(N-1)); with a full-dataset batch this reproduces the
/// aggregate density exactly. N == M == 1 is a closed-form diagnostic mode.
KlTerms kl_terms(const PosteriorBatch& post, const Tensor& z, std::int64_t dataset_size);

/// Same estimate, also accumulating d(w_mi*mi + w_tc*tc + w_dkl*dkl) into
/// the gradients of mu, log_var and z.
KlTerms kl_terms_backward(const PosteriorBatch& post, const Tensor& z, std::int64_t dataset_size,
                          double w_mi, double w_tc, double w_dkl, Tensor& dmu, Tensor& dlogvar,
                          Tensor& dz);

/// Fills a LossBreakdown from raw parts under the config and warm factor.
LossBreakdown total_loss(double l_rc, double l_rd, double l_d, double l_s, double index_mi, double tc,
                         double dkl, const TrainingConfig& cfg, double warm);

struct EncodeTape {
    std::vector<Tensor> trunk;
    Tensor trunk_out;
    Tensor slice_c, slice_d, slice_v;
};

struct DecodeTape {
    std::vector<Tensor> tape;
};

/// Frozen convolutional feature stack for the discriminative-regularizer
/// term; a seed-initialized stand-in for a pretrained perceptual network.
struct PerceptualExtractor {
    ParamStore<real> store;
    Net<real> net;

    static PerceptualExtractor frozen_random(std::uint64_t seed);
    /// 1x1 identity features: reduces the term to plain pixel SSE.
    static PerceptualExtractor identity();
};

double perceptual_loss(const Tensor& x, const Tensor& x_prime, const PerceptualExtractor& ex,
                       Tensor* dx_prime = nullptr);

/// Split-latent convolutional VAE plus its adversarial/supportive heads.
/// All parameters live in one store under the groups "vae", "disc", "sup".
class VaeModel {
public:
    explicit VaeModel(const TrainingConfig& cfg);

    PosteriorBatch encode(const Tensor& x, EncodeTape* tape = nullptr) const;
    GaussianPosterior encode_one(const Image& img) const;
    Tensor decode(const Tensor& z, DecodeTape* tape = nullptr) const;
    Image decode_one(const std::vector<real>& z) const;

    /// Backpropagates posterior gradients through the split heads and trunk.
    void encode_backward(const EncodeTape& tape, const Tensor& dmu, const Tensor& dlogvar);
    /// Returns dz.
    Tensor decode_backward(const DecodeTape& tape, const Tensor& dx_prime);

    Tensor gather_latent(const Tensor& z, const std::vector<int>& indices) const;

    const LatentLayout& layout() const { return layout_; }
    int image_size() const { return image_size_; }
    const TrainingConfig& config() const { return cfg_; }

    ParamStore<real>& store() { return store_; }
    const ParamStore<real>& store() const { return store_; }

    Net<real>& discriminator() { return disc_; }
    Net<real>& supportive() { return sup_; }
    const Net<real>& discriminator() const { return disc_; }
    const Net<real>& supportive() const { return sup_; }
    const Net<real>& decoder_net() const { return dec_; }
    const Net<real>& trunk_net() const { return trunk_; }

    std::uint64_t mask_signature(const Tensor& x) const;

private:
    void build(const TrainingConfig& cfg);

    TrainingConfig cfg_;
    LatentLayout layout_;
    int image_size_ = 32;
    int trunk_width_ = 0;   // fc1 output width
    int slice_c_ = 0, slice_d_ = 0;  // head input slice widths

    ParamStore<real> store_;
    Net<real> trunk_;
    Layer<real> fc_mu_c_, fc_mu_d_, fc_logvar_;
    Net<real> dec_;
    Net<real> disc_, sup_;
};

}  // namespace eclf
