#include "eclf/vae.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "eclf/heads.hpp"
#include "eclf/util.hpp"

namespace eclf {

LatentLayout LatentLayout::plain(int cfv_dim, int ncfv_dim) {
    LatentLayout l;
    l.total_dim = cfv_dim + ncfv_dim;
    l.cfv = {0, cfv_dim};
    l.ncfv = {cfv_dim, cfv_dim + ncfv_dim};
    l.validate();
    return l;
}

LatentLayout LatentLayout::class_specific(int cfvs1_dim, int ncfv_dim, int cfvs2_dim) {
    LatentLayout l;
    l.total_dim = cfvs1_dim + ncfv_dim + cfvs2_dim;
    l.cfvs1 = Range{0, cfvs1_dim};
    l.ncfv = {cfvs1_dim, cfvs1_dim + ncfv_dim};
    l.cfvs2 = Range{cfvs1_dim + ncfv_dim, l.total_dim};
    l.cfv = {0, 0};  // unused in class-specific mode
    l.validate();
    return l;
}

void LatentLayout::validate() const {
    require(total_dim >= 2, "latent layout needs at least 2 dimensions");
    if (is_class_specific()) {
        require(cfvs2.has_value(), "class-specific layout needs both CFVS ranges");
        require(cfvs1->begin == 0 && cfvs1->end == ncfv.begin && ncfv.end == cfvs2->begin &&
                    cfvs2->end == total_dim,
                "class-specific layout must be [CFVS1, NCFV, CFVS2] covering the latent vector");
        require(cfvs1->size() >= 1 && cfvs2->size() >= 1 && ncfv.size() >= 1,
                "class-specific layout ranges must be nonempty");
    } else {
        require(cfv.begin == 0 && cfv.end == ncfv.begin && ncfv.end == total_dim,
                "layout must be [CFV, NCFV] covering the latent vector");
        require(cfv.size() >= 1 && ncfv.size() >= 1, "layout ranges must be nonempty");
    }
}

std::vector<int> LatentLayout::classifiable_indices() const {
    std::vector<int> idx;
    if (is_class_specific()) {
        for (int i = cfvs1->begin; i < cfvs1->end; ++i) idx.push_back(i);
        for (int i = cfvs2->begin; i < cfvs2->end; ++i) idx.push_back(i);
    } else {
        for (int i = cfv.begin; i < cfv.end; ++i) idx.push_back(i);
    }
    return idx;
}

int LatentLayout::classifiable_dim() const {
    return is_class_specific() ? cfvs1->size() + cfvs2->size() : cfv.size();
}

std::string LatentLayout::to_text() const {
    std::ostringstream ss;
    if (is_class_specific())
        ss << "cs:" << cfvs1->size() << ":" << ncfv.size() << ":" << cfvs2->size();
    else
        ss << "plain:" << cfv.size() << ":" << ncfv.size();
    return ss.str();
}

LatentLayout LatentLayout::from_text(const std::string& s) {
    const auto parts = split(trim(s), ':');
    std::int64_t a = 0, b = 0, c = 0;
    if (parts.size() == 3 && parts[0] == "plain" && parse_i64(parts[1], a) && parse_i64(parts[2], b))
        return plain(static_cast<int>(a), static_cast<int>(b));
    if (parts.size() == 4 && parts[0] == "cs" && parse_i64(parts[1], a) && parse_i64(parts[2], b) &&
        parse_i64(parts[3], c))
        return class_specific(static_cast<int>(a), static_cast<int>(b), static_cast<int>(c));
    throw std::runtime_error("bad latent layout text '" + s + "'");
}

GaussianPosterior PosteriorBatch::row(int i) const {
    GaussianPosterior g;
    const int dd = d();
    g.mu.assign(mu.ptr() + static_cast<std::int64_t>(i) * dd,
                mu.ptr() + static_cast<std::int64_t>(i + 1) * dd);
    g.log_var.assign(log_var.ptr() + static_cast<std::int64_t>(i) * dd,
                     log_var.ptr() + static_cast<std::int64_t>(i + 1) * dd);
    return g;
}

std::int64_t TrainingConfig::resolved_warmup_start() const {
    if (warmup_start >= 0) return warmup_start;
    return static_cast<std::int64_t>(0.08 * static_cast<double>(iterations));
}

std::int64_t TrainingConfig::resolved_warmup_end() const {
    if (warmup_end >= 0) return warmup_end;
    return static_cast<std::int64_t>(0.0933 * static_cast<double>(iterations));
}

void TrainingConfig::validate() const {
    require(alpha >= 0 && epsilon_d >= 0 && epsilon_s >= 0 && beta >= 0 && gamma >= 0,
            "loss coefficients must be non-negative");
    layout.validate();
    require(num_classes >= 2, "num_classes must be >= 2");
    require(batch_size >= 2, "batch_size must be >= 2 for the total-correlation estimate");
    require(iterations >= 1, "iterations must be >= 1");
    require(learning_rate > 0, "learning_rate must be positive");
    require(disc_learning_rate >= 0, "disc_learning_rate must be non-negative");
    require(image_size >= 16, "image_size must be >= 16");
    require(log_interval >= 1, "log_interval must be >= 1");
    require(pretrain_iterations >= 0, "pretrain_iterations must be >= 0");
    require(discriminator_updates >= 0, "discriminator_updates must be >= 0");
    const std::int64_t ws = resolved_warmup_start(), we = resolved_warmup_end();
    require(0 <= ws && ws <= we && we <= iterations,
            "warmup window must satisfy start <= end <= iterations");
    if (epsilon_s >= epsilon_d && epsilon_d > 0)
        std::cerr << "warning: supportive weight epsilon_s (" << epsilon_s
                  << ") >= adversarial weight epsilon_d (" << epsilon_d
                  << "); the supportive role is meant to stay secondary\n";
}

namespace {

const char* tying_name(WeightTying t) { return t == WeightTying::tied ? "tied" : "mirrored"; }
const char* arch_name(ArchPreset a) { return a == ArchPreset::paper ? "paper" : "desk"; }
const char* selection_name(SnapshotSelection s) {
    return s == SnapshotSelection::final_iteration ? "final" : "best";
}

}  // namespace

std::string TrainingConfig::to_text() const {
    std::ostringstream ss;
    ss << "alpha = " << fmt_real(alpha) << "\n";
    ss << "epsilon_d = " << fmt_real(epsilon_d) << "\n";
    ss << "epsilon_s = " << fmt_real(epsilon_s) << "\n";
    ss << "beta = " << fmt_real(beta) << "\n";
    ss << "gamma = " << fmt_real(gamma) << "\n";
    ss << "layout = " << layout.to_text() << "\n";
    ss << "num_classes = " << num_classes << "\n";
    ss << "batch_size = " << batch_size << "\n";
    ss << "dataset_size = " << dataset_size << "\n";
    ss << "iterations = " << iterations << "\n";
    ss << "pretrain_iterations = " << pretrain_iterations << "\n";
    ss << "warmup_start = " << warmup_start << "\n";
    ss << "warmup_end = " << warmup_end << "\n";
    ss << "learning_rate = " << fmt_real(learning_rate) << "\n";
    ss << "disc_learning_rate = " << fmt_real(disc_learning_rate) << "\n";
    ss << "seed = " << seed << "\n";
    ss << "tying = " << tying_name(tying) << "\n";
    ss << "arch = " << arch_name(arch) << "\n";
    ss << "image_size = " << image_size << "\n";
    ss << "log_interval = " << log_interval << "\n";
    ss << "checkpoint_interval = " << checkpoint_interval << "\n";
    ss << "selection = " << selection_name(selection) << "\n";
    ss << "discriminator_updates = " << discriminator_updates << "\n";
    ss << "cs_supportive = " << (cs_supportive ? "true" : "false") << "\n";
    return ss.str();
}

TrainingConfig TrainingConfig::from_text(const std::string& s) {
    TrainingConfig cfg;
    for (const auto& raw : split(s, '\n')) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "training config: bad line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        double d = 0;
        std::int64_t i = 0;
        std::uint64_t u = 0;
        if (key == "alpha" && parse_f64(value, d)) cfg.alpha = d;
        else if (key == "epsilon_d" && parse_f64(value, d)) cfg.epsilon_d = d;
        else if (key == "epsilon_s" && parse_f64(value, d)) cfg.epsilon_s = d;
        else if (key == "beta" && parse_f64(value, d)) cfg.beta = d;
        else if (key == "gamma" && parse_f64(value, d)) cfg.gamma = d;
        else if (key == "layout") cfg.layout = LatentLayout::from_text(value);
        else if (key == "num_classes" && parse_i64(value, i)) cfg.num_classes = static_cast<int>(i);
        else if (key == "batch_size" && parse_i64(value, i)) cfg.batch_size = static_cast<int>(i);
        else if (key == "dataset_size" && parse_i64(value, i)) cfg.dataset_size = i;
        else if (key == "iterations" && parse_i64(value, i)) cfg.iterations = i;
        else if (key == "pretrain_iterations" && parse_i64(value, i)) cfg.pretrain_iterations = i;
        else if (key == "warmup_start" && parse_i64(value, i)) cfg.warmup_start = i;
        else if (key == "warmup_end" && parse_i64(value, i)) cfg.warmup_end = i;
        else if (key == "learning_rate" && parse_f64(value, d)) cfg.learning_rate = d;
        else if (key == "disc_learning_rate" && parse_f64(value, d)) cfg.disc_learning_rate = d;
        else if (key == "seed" && parse_u64(value, u)) cfg.seed = u;
        else if (key == "tying") cfg.tying = (value == "tied") ? WeightTying::tied : WeightTying::mirrored;
        else if (key == "arch") cfg.arch = (value == "paper") ? ArchPreset::paper : ArchPreset::desk;
        else if (key == "image_size" && parse_i64(value, i)) cfg.image_size = static_cast<int>(i);
        else if (key == "log_interval" && parse_i64(value, i)) cfg.log_interval = i;
        else if (key == "checkpoint_interval" && parse_i64(value, i)) cfg.checkpoint_interval = i;
        else if (key == "selection")
            cfg.selection = (value == "final") ? SnapshotSelection::final_iteration
                                               : SnapshotSelection::best_loss;
        else if (key == "discriminator_updates" && parse_i64(value, i))
            cfg.discriminator_updates = static_cast<int>(i);
        else if (key == "cs_supportive") cfg.cs_supportive = (value == "true" || value == "1");
        else throw std::runtime_error("training config: unknown key '" + key + "'");
    }
    return cfg;
}

double warmup(std::int64_t iter, std::int64_t start, std::int64_t end) {
    require(start <= end, "warmup window start must be <= end");
    if (iter < start) return 0.0;
    if (iter >= end) return 1.0;
    return static_cast<double>(iter - start) / static_cast<double>(end - start);
}

Tensor reparameterize(const PosteriorBatch& post, const Tensor& noise) {
    require(noise.shape == post.mu.shape, "reparameterize: noise shape " + shape_str(noise) +
                                              " does not match posterior " + shape_str(post.mu));
    Tensor z(post.mu.shape);
    for (std::int64_t i = 0; i < z.size(); ++i)
        z[i] = post.mu[i] + std::exp(post.log_var[i] / real(2)) * noise[i];
    return z;
}

double recon_loss(const Tensor& x, const Tensor& x_prime, Tensor* dx_prime) {
    return sum_squared_error_mean<real>(x_prime, x, dx_prime);
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

struct KlWork {
    int n = 0, d = 0;
    std::vector<double> lj;    // [n, n, d] per-dim log densities
    std::vector<double> l;     // [n, n] joint log densities
    std::vector<double> logw;  // [n, n] inclusion weights
    std::vector<double> A;     // [n]
    std::vector<double> B;     // [n, d]
    std::vector<double> P;     // [n]
    KlTerms terms;
};

KlWork kl_forward(const PosteriorBatch& post, const Tensor& z, std::int64_t M) {
    KlWork w;
    w.n = post.n();
    w.d = post.d();
    const int n = w.n, d = w.d;
    require(z.shape == post.mu.shape, "kl_terms: z shape does not match posterior");
    require(M >= n, "kl_terms: dataset size must be >= batch size");

    w.lj.assign(static_cast<std::size_t>(n) * n * d, 0.0);
    w.l.assign(static_cast<std::size_t>(n) * n, 0.0);
    w.logw.assign(static_cast<std::size_t>(n) * n, 0.0);
    w.A.assign(n, 0.0);
    w.B.assign(static_cast<std::size_t>(n) * d, 0.0);
    w.P.assign(n, 0.0);

    const double log_self = -std::log(static_cast<double>(M));
    const double log_other =
        n > 1 ? std::log(static_cast<double>(M - 1)) -
                    std::log(static_cast<double>(M) * static_cast<double>(n - 1))
              : 0.0;

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double joint = 0.0;
            for (int k = 0; k < d; ++k) {
                const double mu = post.mu[static_cast<std::int64_t>(j) * d + k];
                const double lv = post.log_var[static_cast<std::int64_t>(j) * d + k];
                const double zz = z[static_cast<std::int64_t>(i) * d + k];
                const double diff = zz - mu;
                const double term = -0.5 * (kLogTwoPi + lv + diff * diff * std::exp(-lv));
                w.lj[(static_cast<std::size_t>(i) * n + j) * d + k] = term;
                joint += term;
            }
            w.l[static_cast<std::size_t>(i) * n + j] = joint;
            w.logw[static_cast<std::size_t>(i) * n + j] = (i == j) ? log_self : log_other;
        }
        double p = 0.0;
        for (int k = 0; k < d; ++k) {
            const double zz = z[static_cast<std::int64_t>(i) * d + k];
            p += -0.5 * (kLogTwoPi + zz * zz);
        }
        w.P[i] = p;
    }

    auto lse = [](const double* vals, const double* offs, int count, int stride) {
        double mx = -1e300;
        for (int j = 0; j < count; ++j) mx = std::max(mx, vals[j * stride] + offs[j * stride]);
        double sum = 0.0;
        for (int j = 0; j < count; ++j) sum += std::exp(vals[j * stride] + offs[j * stride] - mx);
        return mx + std::log(sum);
    };

    double mi = 0.0, tc = 0.0, dkl = 0.0;
    for (int i = 0; i < n; ++i) {
        w.A[i] = lse(&w.l[static_cast<std::size_t>(i) * n], &w.logw[static_cast<std::size_t>(i) * n],
                     n, 1);
        double sumB = 0.0;
        for (int k = 0; k < d; ++k) {
            // logsumexp over j of logw[i,j] + lj[i,j,k]
            double mx = -1e300;
            for (int j = 0; j < n; ++j)
                mx = std::max(mx, w.logw[static_cast<std::size_t>(i) * n + j] +
                                      w.lj[(static_cast<std::size_t>(i) * n + j) * d + k]);
            double sum = 0.0;
            for (int j = 0; j < n; ++j)
                sum += std::exp(w.logw[static_cast<std::size_t>(i) * n + j] +
                                w.lj[(static_cast<std::size_t>(i) * n + j) * d + k] - mx);
            w.B[static_cast<std::size_t>(i) * d + k] = mx + std::log(sum);
            sumB += w.B[static_cast<std::size_t>(i) * d + k];
        }
        const double D = w.l[static_cast<std::size_t>(i) * n + i];
        mi += D - w.A[i];
        tc += w.A[i] - sumB;
        dkl += sumB - w.P[i];
    }
    w.terms.index_mi = mi / n;
    w.terms.tc = tc / n;
    w.terms.dkl = dkl / n;
    return w;
}

KlTerms kl_diagnostic_single(const PosteriorBatch& post) {
    // N = M = 1: the aggregate equals the single posterior, so index-code MI
    // and TC vanish and DKL is the closed-form Gaussian KL.
    KlTerms t;
    const int d = post.d();
    double dkl = 0.0;
    for (int k = 0; k < d; ++k) {
        const double mu = post.mu[k];
        const double lv = post.log_var[k];
        dkl += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
    }
    t.dkl = dkl;
    return t;
}

}  // namespace

KlTerms kl_terms(const PosteriorBatch& post, const Tensor& z, std::int64_t dataset_size) {
    if (post.n() == 1 && dataset_size == 1) return kl_diagnostic_single(post);
    require(post.n() >= 2,
            "kl_terms: batch size must be >= 2 (total correlation is undefined on a singleton aggregate)");
    return kl_forward(post, z, dataset_size).terms;
}

KlTerms kl_terms_backward(const PosteriorBatch& post, const Tensor& z, std::int64_t dataset_size,
                          double w_mi, double w_tc, double w_dkl, Tensor& dmu, Tensor& dlogvar,
                          Tensor& dz) {
    const int n = post.n(), d = post.d();
    require(dmu.shape == post.mu.shape && dlogvar.shape == post.mu.shape && dz.shape == post.mu.shape,
            "kl_terms_backward: gradient shapes must match the posterior");

    if (n == 1 && dataset_size == 1) {
        for (int k = 0; k < d; ++k) {
            const double mu = post.mu[k];
            const double lv = post.log_var[k];
            dmu[k] += static_cast<real>(w_dkl * mu);
            dlogvar[k] += static_cast<real>(w_dkl * 0.5 * (std::exp(lv) - 1.0));
        }
        return kl_diagnostic_single(post);
    }
    require(n >= 2,
            "kl_terms: batch size must be >= 2 (total correlation is undefined on a singleton aggregate)");

    KlWork w = kl_forward(post, z, dataset_size);

    const double gD = w_mi / n;
    const double gA = (w_tc - w_mi) / n;
    const double gB = (w_dkl - w_tc) / n;
    const double gP = -w_dkl / n;

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double sA =
                std::exp(w.logw[static_cast<std::size_t>(i) * n + j] +
                         w.l[static_cast<std::size_t>(i) * n + j] - w.A[i]);
            for (int k = 0; k < d; ++k) {
                const double sB =
                    std::exp(w.logw[static_cast<std::size_t>(i) * n + j] +
                             w.lj[(static_cast<std::size_t>(i) * n + j) * d + k] -
                             w.B[static_cast<std::size_t>(i) * d + k]);
                double coef = gA * sA + gB * sB;
                if (i == j) coef += gD;
                if (coef == 0.0) continue;
                const double mu = post.mu[static_cast<std::int64_t>(j) * d + k];
                const double lv = post.log_var[static_cast<std::int64_t>(j) * d + k];
                const double zz = z[static_cast<std::int64_t>(i) * d + k];
                const double diff = zz - mu;
                const double inv_var = std::exp(-lv);
                dz[static_cast<std::int64_t>(i) * d + k] += static_cast<real>(coef * (-diff * inv_var));
                dmu[static_cast<std::int64_t>(j) * d + k] += static_cast<real>(coef * diff * inv_var);
                dlogvar[static_cast<std::int64_t>(j) * d + k] +=
                    static_cast<real>(coef * 0.5 * (diff * diff * inv_var - 1.0));
            }
        }
        for (int k = 0; k < d; ++k)
            dz[static_cast<std::int64_t>(i) * d + k] +=
                static_cast<real>(gP * (-static_cast<double>(z[static_cast<std::int64_t>(i) * d + k])));
    }
    return w.terms;
}

LossBreakdown total_loss(double l_rc, double l_rd, double l_d, double l_s, double index_mi, double tc,
                         double dkl, const TrainingConfig& cfg, double warm) {
    require(warm >= 0.0 && warm <= 1.0, "total_loss: warm must be in [0,1]");
    require(cfg.alpha >= 0 && cfg.epsilon_d >= 0 && cfg.epsilon_s >= 0 && cfg.beta >= 0 && cfg.gamma >= 0,
            "loss coefficients must be non-negative");
    LossBreakdown b;
    b.l_rc = l_rc;
    b.l_rd = l_rd;
    b.l_d = l_d;
    b.l_s = l_s;
    b.index_mi = index_mi;
    b.tc = tc;
    b.dkl = dkl;
    b.total = LossBreakdown::combine(l_rc, l_rd, l_d, l_s, tc, dkl, cfg, warm);
    return b;
}

PerceptualExtractor PerceptualExtractor::frozen_random(std::uint64_t seed) {
    PerceptualExtractor ex;
    ex.net.layers.push_back(make_layer<real>(ex.store, LayerSpec::conv("perc.c1", 3, 8, 3, 1, 1),
                                             derive_seed(seed, 0xF001), "perc"));
    ex.net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    ex.net.layers.push_back(make_layer<real>(ex.store, LayerSpec::conv("perc.c2", 8, 8, 3, 2, 1),
                                             derive_seed(seed, 0xF002), "perc"));
    ex.net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    ex.net.layers.push_back(make_layer<real>(ex.store, LayerSpec::conv("perc.c3", 8, 8, 3, 2, 1),
                                             derive_seed(seed, 0xF003), "perc"));
    for (auto& p : ex.store.params) p.frozen = true;
    return ex;
}

PerceptualExtractor PerceptualExtractor::identity() {
    PerceptualExtractor ex;
    auto layer = make_layer<real>(ex.store, LayerSpec::conv("perc.id", 3, 3, 1, 1, 0), 0, "perc");
    auto& w = ex.store.at(layer.w_id).value;
    w.fill(real(0));
    for (int c = 0; c < 3; ++c) w[static_cast<std::int64_t>(c) * 3 + c] = real(1);
    ex.net.layers.push_back(layer);
    for (auto& p : ex.store.params) p.frozen = true;
    return ex;
}

double perceptual_loss(const Tensor& x, const Tensor& x_prime, const PerceptualExtractor& ex,
                       Tensor* dx_prime) {
    ParamStore<real>& store = const_cast<ParamStore<real>&>(ex.store);
    const Tensor fx = ex.net.forward(store, x);
    if (!dx_prime) {
        const Tensor fp = ex.net.forward(store, x_prime);
        return sum_squared_error_mean<real>(fp, fx);
    }
    std::vector<Tensor> tape;
    const Tensor fp = ex.net.forward(store, x_prime, &tape);
    Tensor dfeat;
    const double loss = sum_squared_error_mean<real>(fp, fx, &dfeat);
    *dx_prime = ex.net.backward(store, tape, dfeat);
    return loss;
}

namespace {

struct ArchShape {
    std::vector<int> conv_channels;
    int spatial_after;  // image_size / 2^n_convs
    int flat;           // conv_channels.back() * spatial_after^2
};

ArchShape arch_shape(ArchPreset preset, int image_size) {
    ArchShape a;
    a.conv_channels = (preset == ArchPreset::paper) ? std::vector<int>{32, 64, 128, 256, 512}
                                                    : std::vector<int>{8, 16, 32};
    int s = image_size;
    for (std::size_t i = 0; i < a.conv_channels.size(); ++i) {
        require(s % 2 == 0, "image_size must halve through every conv layer");
        s /= 2;
    }
    require(s >= 2, "image too small for the conv stack");
    a.spatial_after = s;
    a.flat = a.conv_channels.back() * s * s;
    return a;
}

}  // namespace

VaeModel::VaeModel(const TrainingConfig& cfg) { build(cfg); }

void VaeModel::build(const TrainingConfig& cfg) {
    cfg.layout.validate();
    cfg_ = cfg;
    layout_ = cfg.layout;
    image_size_ = cfg.image_size;
    if (cfg.arch == ArchPreset::paper)
        require(image_size_ == 128, "paper preset expects 128x128x3 input");

    const ArchShape arch = arch_shape(cfg.arch, image_size_);
    const int D = layout_.total_dim;
    trunk_width_ = arch.flat;
    slice_c_ = arch.flat / 4;
    slice_d_ = arch.flat / 4;
    const int slice_v = arch.flat - slice_c_ - slice_d_;
    require(slice_c_ >= 1 && slice_v >= 2, "trunk too narrow to split for the posterior heads");

    const std::uint64_t seed = derive_seed(cfg.seed, 0xA12C);

    // encoder trunk: conv stack, flatten, square fc, relu
    int in_ch = 3;
    std::vector<int> enc_w_ids;
    for (std::size_t i = 0; i < arch.conv_channels.size(); ++i) {
        const int out_ch = arch.conv_channels[i];
        auto layer = make_layer<real>(
            store_, LayerSpec::conv("enc.c" + std::to_string(i + 1), in_ch, out_ch, 4, 2, 1), seed,
            "vae");
        enc_w_ids.push_back(layer.w_id);
        trunk_.layers.push_back(layer);
        trunk_.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
        in_ch = out_ch;
    }
    trunk_.layers.push_back(Layer<real>{LayerSpec::flatten(), -1, -1});
    trunk_.layers.push_back(
        make_layer<real>(store_, LayerSpec::dense("enc.fc1", arch.flat, arch.flat), seed, "vae"));
    trunk_.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});

    // posterior heads on disjoint slices of the trunk output
    fc_mu_c_ = make_layer<real>(
        store_, LayerSpec::dense("enc.fc_c", slice_c_, layout_.classifiable_dim()), seed, "vae");
    fc_mu_d_ =
        make_layer<real>(store_, LayerSpec::dense("enc.fc_d", slice_d_, layout_.ncfv.size()), seed, "vae");
    fc_logvar_ = make_layer<real>(store_, LayerSpec::dense("enc.fc_v", slice_v, D), seed, "vae");

    // decoder: dense up-projection then mirrored transposed convs
    dec_.layers.push_back(
        make_layer<real>(store_, LayerSpec::dense("dec.fc_z", D, arch.flat), seed, "vae"));
    dec_.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    dec_.layers.push_back(Layer<real>{
        LayerSpec::reshape({arch.conv_channels.back(), arch.spatial_after, arch.spatial_after}), -1, -1});
    for (int i = static_cast<int>(arch.conv_channels.size()) - 1; i >= 0; --i) {
        const int tin = arch.conv_channels[static_cast<std::size_t>(i)];
        const int tout = i > 0 ? arch.conv_channels[static_cast<std::size_t>(i - 1)] : 3;
        const int tie = cfg.tying == WeightTying::tied ? enc_w_ids[static_cast<std::size_t>(i)] : -1;
        dec_.layers.push_back(make_layer<real>(
            store_,
            LayerSpec::conv_transpose("dec.t" + std::to_string(arch.conv_channels.size() - i), tin, tout,
                                      4, 2, 1),
            seed, "vae", tie));
        if (i > 0) dec_.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    }
    dec_.layers.push_back(Layer<real>{LayerSpec::sigmoid(), -1, -1});

    // heads
    disc_ = build_head(store_, "disc", HeadSpec::with_defaults(layout_.ncfv.size(), cfg.num_classes),
                       derive_seed(cfg.seed, 0xD15C), "disc");
    sup_ = build_head(store_, "sup",
                      HeadSpec::with_defaults(layout_.classifiable_dim(), cfg.num_classes),
                      derive_seed(cfg.seed, 0x50B0), "sup");
}

PosteriorBatch VaeModel::encode(const Tensor& x, EncodeTape* tape) const {
    require(x.ndim() == 4 && x.dim(1) == 3 && x.dim(2) == image_size_ && x.dim(3) == image_size_,
            "encode: expected input [N x 3 x " + std::to_string(image_size_) + " x " +
                std::to_string(image_size_) + "], got " + shape_str(x));
    EncodeTape local;
    EncodeTape& tp = tape ? *tape : local;
    tp.trunk.clear();
    tp.trunk_out = trunk_.forward(store_, x, &tp.trunk);

    const int n = x.dim(0);
    const int F = trunk_width_;
    auto slice = [&](int begin, int width) {
        Tensor out({n, width});
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < width; ++k)
                out[static_cast<std::int64_t>(i) * width + k] =
                    tp.trunk_out[static_cast<std::int64_t>(i) * F + begin + k];
        return out;
    };
    tp.slice_c = slice(0, slice_c_);
    tp.slice_d = slice(slice_c_, slice_d_);
    tp.slice_v = slice(slice_c_ + slice_d_, F - slice_c_ - slice_d_);

    const Tensor mu_c = fc_mu_c_.forward(store_, tp.slice_c);
    const Tensor mu_d = fc_mu_d_.forward(store_, tp.slice_d);
    const Tensor logvar = fc_logvar_.forward(store_, tp.slice_v);

    PosteriorBatch post;
    const int D = layout_.total_dim;
    post.mu = Tensor({n, D});
    post.log_var = logvar;
    const std::vector<int> cls_idx = layout_.classifiable_indices();
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < cls_idx.size(); ++k)
            post.mu[static_cast<std::int64_t>(i) * D + cls_idx[k]] =
                mu_c[static_cast<std::int64_t>(i) * static_cast<int>(cls_idx.size()) +
                     static_cast<int>(k)];
        for (int k = 0; k < layout_.ncfv.size(); ++k)
            post.mu[static_cast<std::int64_t>(i) * D + layout_.ncfv.begin + k] =
                mu_d[static_cast<std::int64_t>(i) * layout_.ncfv.size() + k];
    }
    return post;
}

GaussianPosterior VaeModel::encode_one(const Image& img) const {
    Tensor x = img.to_tensor().reshaped({1, 3, img.h, img.w});
    return encode(x).row(0);
}

Tensor VaeModel::decode(const Tensor& z, DecodeTape* tape) const {
    require(z.ndim() == 2 && z.dim(1) == layout_.total_dim,
            "decode: expected [N x " + std::to_string(layout_.total_dim) + "] latent, got " +
                shape_str(z));
    if (!tape) return dec_.forward(store_, z);
    tape->tape.clear();
    return dec_.forward(store_, z, &tape->tape);
}

Image VaeModel::decode_one(const std::vector<real>& z) const {
    require(static_cast<int>(z.size()) == layout_.total_dim, "decode_one: bad latent length");
    Tensor zz({1, layout_.total_dim}, std::vector<real>(z));
    return Image::from_tensor(decode(zz));
}

void VaeModel::encode_backward(const EncodeTape& tape, const Tensor& dmu, const Tensor& dlogvar) {
    const int n = dmu.dim(0);
    const int D = layout_.total_dim;
    require(dmu.ndim() == 2 && dmu.dim(1) == D, "encode_backward: bad dmu shape");

    const std::vector<int> cls_idx = layout_.classifiable_indices();
    Tensor dmu_c({n, static_cast<int>(cls_idx.size())});
    Tensor dmu_d({n, layout_.ncfv.size()});
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < cls_idx.size(); ++k)
            dmu_c[static_cast<std::int64_t>(i) * static_cast<int>(cls_idx.size()) +
                  static_cast<int>(k)] = dmu[static_cast<std::int64_t>(i) * D + cls_idx[k]];
        for (int k = 0; k < layout_.ncfv.size(); ++k)
            dmu_d[static_cast<std::int64_t>(i) * layout_.ncfv.size() + k] =
                dmu[static_cast<std::int64_t>(i) * D + layout_.ncfv.begin + k];
    }

    const Tensor dslice_c = fc_mu_c_.backward(store_, tape.slice_c, dmu_c);
    const Tensor dslice_d = fc_mu_d_.backward(store_, tape.slice_d, dmu_d);
    const Tensor dslice_v = fc_logvar_.backward(store_, tape.slice_v, dlogvar);

    const int F = trunk_width_;
    Tensor dtrunk({n, F});
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < slice_c_; ++k)
            dtrunk[static_cast<std::int64_t>(i) * F + k] =
                dslice_c[static_cast<std::int64_t>(i) * slice_c_ + k];
        for (int k = 0; k < slice_d_; ++k)
            dtrunk[static_cast<std::int64_t>(i) * F + slice_c_ + k] =
                dslice_d[static_cast<std::int64_t>(i) * slice_d_ + k];
        const int vw = F - slice_c_ - slice_d_;
        for (int k = 0; k < vw; ++k)
            dtrunk[static_cast<std::int64_t>(i) * F + slice_c_ + slice_d_ + k] =
                dslice_v[static_cast<std::int64_t>(i) * vw + k];
    }
    trunk_.backward(store_, tape.trunk, dtrunk);
}

Tensor VaeModel::decode_backward(const DecodeTape& tape, const Tensor& dx_prime) {
    return dec_.backward(store_, tape.tape, dx_prime);
}

Tensor VaeModel::gather_latent(const Tensor& z, const std::vector<int>& indices) const {
    const int n = z.dim(0);
    Tensor out({n, static_cast<int>(indices.size())});
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < indices.size(); ++k)
            out[static_cast<std::int64_t>(i) * static_cast<int>(indices.size()) +
                static_cast<int>(k)] = z[static_cast<std::int64_t>(i) * layout_.total_dim + indices[k]];
    return out;
}

std::uint64_t VaeModel::mask_signature(const Tensor& x) const {
    return trunk_.mask_signature(store_, x);
}

}  // namespace eclf
