#include "eclf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "eclf/trainer.hpp"

namespace eclf {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace

void MixtureComponent::validate(int dims) const {
    require(static_cast<int>(mean.size()) == dims && static_cast<int>(var.size()) == dims,
            "mixture component dimension mismatch");
    for (double v : var) require(v > 0.0, "mixture variances must be positive");
    if (rho != 0.0) {
        require(dims == 2, "correlated components are supported in 2 dims only");
        require(rho > -1.0 && rho < 1.0, "correlation must be in (-1, 1)");
    }
}

int GaussianMixture::dims() const {
    require(!components.empty(), "mixture has no components");
    return static_cast<int>(components[0].mean.size());
}

void GaussianMixture::validate() const {
    const int d = dims();
    require(d >= 1 && d <= 3, "mixture supports 1 to 3 dimensions");
    for (const auto& c : components) c.validate(d);
}

double GaussianMixture::log_density(const std::vector<double>& x) const {
    const int d = dims();
    double mx = -1e300;
    std::vector<double> terms(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        double lp;
        if (c.rho != 0.0) {
            const double dx = x[0] - c.mean[0], dy = x[1] - c.mean[1];
            const double s1 = std::sqrt(c.var[0]), s2 = std::sqrt(c.var[1]);
            const double om = 1.0 - c.rho * c.rho;
            const double q = (dx * dx / c.var[0] - 2.0 * c.rho * dx * dy / (s1 * s2) +
                              dy * dy / c.var[1]) / om;
            lp = -0.5 * (2.0 * kLogTwoPi + std::log(c.var[0] * c.var[1] * om) + q);
        } else {
            lp = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = x[static_cast<std::size_t>(j)] - c.mean[static_cast<std::size_t>(j)];
                lp += -0.5 * (kLogTwoPi + std::log(c.var[static_cast<std::size_t>(j)]) +
                              diff * diff / c.var[static_cast<std::size_t>(j)]);
            }
        }
        terms[k] = lp;
        mx = std::max(mx, lp);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - mx);
    return mx + std::log(sum / static_cast<double>(components.size()));
}

double GaussianMixture::log_marginal(int dim, double x) const {
    double mx = -1e300;
    std::vector<double> terms(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        const double diff = x - c.mean[static_cast<std::size_t>(dim)];
        const double v = c.var[static_cast<std::size_t>(dim)];
        terms[k] = -0.5 * (kLogTwoPi + std::log(v) + diff * diff / v);
        mx = std::max(mx, terms[k]);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - mx);
    return mx + std::log(sum / static_cast<double>(components.size()));
}

std::vector<double> GaussianMixture::sample(Rng& rng) const {
    const int d = dims();
    const auto& c = components[static_cast<std::size_t>(rng.below(components.size()))];
    std::vector<double> x(static_cast<std::size_t>(d));
    if (c.rho != 0.0) {
        const double u = rng.normal(), v = rng.normal();
        const double s1 = std::sqrt(c.var[0]), s2 = std::sqrt(c.var[1]);
        x[0] = c.mean[0] + s1 * u;
        x[1] = c.mean[1] + s2 * (c.rho * u + std::sqrt(1.0 - c.rho * c.rho) * v);
    } else {
        for (int j = 0; j < d; ++j)
            x[static_cast<std::size_t>(j)] =
                c.mean[static_cast<std::size_t>(j)] +
                std::sqrt(c.var[static_cast<std::size_t>(j)]) * rng.normal();
    }
    return x;
}

GaussianMixture GaussianMixture::from_posteriors(const PosteriorBatch& post) {
    GaussianMixture q;
    const int d = post.d();
    require(d >= 1 && d <= 3, "from_posteriors: quadrature oracle handles up to 3 dims");
    for (int i = 0; i < post.n(); ++i) {
        MixtureComponent c;
        for (int j = 0; j < d; ++j) {
            c.mean.push_back(static_cast<double>(post.mu[static_cast<std::int64_t>(i) * d + j]));
            c.var.push_back(std::exp(static_cast<double>(post.log_var[static_cast<std::int64_t>(i) * d + j])));
        }
        q.components.push_back(std::move(c));
    }
    return q;
}

double tc_oracle(const GaussianMixture& q) {
    q.validate();
    const int d = q.dims();
    const double lo = -8.0, hi = 8.0;
    const int n = d <= 2 ? 1024 : 160;
    const double step = (hi - lo) / n;

    std::vector<double> coords(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = lo + (i + 0.5) * step;

    // marginal log densities per axis are reused across the grid
    std::vector<std::vector<double>> marg(static_cast<std::size_t>(d),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i)
            marg[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                q.log_marginal(j, coords[static_cast<std::size_t>(i)]);

    double acc = 0.0;
    std::vector<double> x(static_cast<std::size_t>(d));
    if (d == 1) return 0.0;  // TC of a univariate density is identically zero
    if (d == 2) {
        for (int a = 0; a < n; ++a) {
            x[0] = coords[static_cast<std::size_t>(a)];
            for (int b = 0; b < n; ++b) {
                x[1] = coords[static_cast<std::size_t>(b)];
                const double lq = q.log_density(x);
                const double qv = std::exp(lq);
                if (qv < 1e-300) continue;
                acc += qv * (lq - marg[0][static_cast<std::size_t>(a)] -
                             marg[1][static_cast<std::size_t>(b)]);
            }
        }
        return acc * step * step;
    }
    for (int a = 0; a < n; ++a) {
        x[0] = coords[static_cast<std::size_t>(a)];
        for (int b = 0; b < n; ++b) {
            x[1] = coords[static_cast<std::size_t>(b)];
            for (int c = 0; c < n; ++c) {
                x[2] = coords[static_cast<std::size_t>(c)];
                const double lq = q.log_density(x);
                const double qv = std::exp(lq);
                if (qv < 1e-300) continue;
                acc += qv * (lq - marg[0][static_cast<std::size_t>(a)] -
                             marg[1][static_cast<std::size_t>(b)] - marg[2][static_cast<std::size_t>(c)]);
            }
        }
    }
    return acc * step * step * step;
}

double tc_monte_carlo(const GaussianMixture& q, std::int64_t samples, Rng& rng) {
    q.validate();
    const int d = q.dims();
    double acc = 0.0;
    for (std::int64_t s = 0; s < samples; ++s) {
        const std::vector<double> x = q.sample(rng);
        double lm = 0.0;
        for (int j = 0; j < d; ++j) lm += q.log_marginal(j, x[static_cast<std::size_t>(j)]);
        acc += q.log_density(x) - lm;
    }
    return acc / static_cast<double>(samples);
}

DecompositionResult decomposition_check_posteriors(const PosteriorBatch& post, std::int64_t samples,
                                                   std::uint64_t seed) {
    const int n = post.n(), d = post.d();
    DecompositionResult r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            const double mu = post.mu[static_cast<std::int64_t>(i) * d + j];
            const double lv = post.log_var[static_cast<std::int64_t>(i) * d + j];
            r.lhs += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
        }
    r.lhs /= n;

    Rng rng(derive_seed(seed, 0xDEC0));
    const std::int64_t rounds = std::max<std::int64_t>(1, samples / n);
    double mi = 0, tc = 0, dkl = 0;
    for (std::int64_t round = 0; round < rounds; ++round) {
        Tensor noise({n, d});
        for (auto& v : noise.data) v = static_cast<real>(rng.normal());
        const Tensor z = reparameterize(post, noise);
        const KlTerms terms = kl_terms(post, z, n);  // full batch: exact aggregate weights
        mi += terms.index_mi;
        tc += terms.tc;
        dkl += terms.dkl;
    }
    r.index_mi = mi / static_cast<double>(rounds);
    r.tc = tc / static_cast<double>(rounds);
    r.dkl = dkl / static_cast<double>(rounds);
    r.rhs = r.index_mi + r.tc + r.dkl;
    r.residual = std::fabs(r.lhs - r.rhs);
    return r;
}

DecompositionResult decomposition_check(const VaeModel& model, const Dataset& ds,
                                        const std::vector<int>& idx, std::int64_t samples,
                                        std::uint64_t seed) {
    const Tensor x = images_to_batch(ds, idx);
    const PosteriorBatch post = model.encode(x);
    return decomposition_check_posteriors(post, samples, seed);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && a.size() >= 2, "spearman needs two equal-length series (n >= 2)");
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

int AlignmentMatrix::best_factor_for(int dim) const {
    int best = 0;
    for (int f = 1; f < static_cast<int>(factor_names.size()); ++f)
        if (at(f, dim) > at(best, dim)) best = f;
    return best;
}

double AlignmentMatrix::best_score_for(int factor) const {
    double best = 0.0;
    for (int d = 0; d < latent_dims; ++d) best = std::max(best, at(factor, d));
    return best;
}

std::string AlignmentMatrix::to_csv() const {
    std::ostringstream ss;
    ss << "factor";
    for (int d = 0; d < latent_dims; ++d) ss << ",z" << d;
    ss << "\n";
    for (std::size_t f = 0; f < factor_names.size(); ++f) {
        ss << factor_names[f];
        for (int d = 0; d < latent_dims; ++d) ss << "," << fmt_real(at(static_cast<int>(f), d));
        ss << "\n";
    }
    return ss.str();
}

AlignmentMatrix factor_alignment(const Tensor& latent_means, const std::vector<FactorRecord>& records) {
    require(latent_means.ndim() == 2, "factor_alignment expects [N x D] latent means");
    const int n = latent_means.dim(0), d = latent_means.dim(1);
    require(static_cast<int>(records.size()) == n, "factor_alignment: record count mismatch");
    require(n >= 3, "factor_alignment needs at least 3 probes");

    AlignmentMatrix m;
    m.factor_names = {"base_hue", "spot_count", "spot_radius", "spot_darkness", "shape_eccentricity"};
    m.latent_dims = d;
    m.scores.assign(m.factor_names.size() * static_cast<std::size_t>(d), 0.0);

    std::vector<std::vector<double>> factors(m.factor_names.size(),
                                             std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        const auto& f = records[static_cast<std::size_t>(i)];
        factors[0][static_cast<std::size_t>(i)] = f.base_hue;
        factors[1][static_cast<std::size_t>(i)] = f.spot_count;
        factors[2][static_cast<std::size_t>(i)] = f.spot_radius;
        factors[3][static_cast<std::size_t>(i)] = f.spot_darkness;
        factors[4][static_cast<std::size_t>(i)] = f.shape_eccentricity;
    }

    std::vector<double> column(static_cast<std::size_t>(n));
    for (int dim = 0; dim < d; ++dim) {
        for (int i = 0; i < n; ++i)
            column[static_cast<std::size_t>(i)] = latent_means[static_cast<std::int64_t>(i) * d + dim];
        for (std::size_t f = 0; f < m.factor_names.size(); ++f)
            m.scores[f * static_cast<std::size_t>(d) + static_cast<std::size_t>(dim)] =
                std::fabs(spearman(factors[f], column));
    }
    return m;
}

double SweepResult::trend(std::uint64_t seed, const char* metric) const {
    std::vector<double> xs, ys;
    for (const auto& c : cells) {
        if (c.seed != seed) continue;
        xs.push_back(c.value);
        if (std::string(metric) == "tc") ys.push_back(c.tc);
        else if (std::string(metric) == "l_rc") ys.push_back(c.l_rc);
        else if (std::string(metric) == "accuracy") ys.push_back(c.accuracy);
        else throw std::runtime_error("unknown sweep metric");
    }
    return spearman(xs, ys);
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream ss;
    ss << "axis,value,seed,tc,l_rc,accuracy\n";
    for (const auto& c : r.cells)
        ss << (c.axis == SweepAxis::beta ? "beta" : "latent_dim") << "," << fmt_real(c.value) << ","
           << c.seed << "," << fmt_real(c.tc) << "," << fmt_real(c.l_rc) << ","
           << fmt_real(c.accuracy) << "\n";
    return ss.str();
}

SweepResult run_sweep(SweepAxis axis, const std::vector<double>& values,
                      const std::vector<std::uint64_t>& seeds, const Dataset& ds,
                      const TrainingConfig& base, const ClassifierConfig& cls_cfg) {
    require(!values.empty() && !seeds.empty(), "run_sweep: values and seeds must be nonempty");
    SweepResult result;
    result.values = values;
    result.seeds = seeds;

    for (const std::uint64_t seed : seeds) {
        for (const double value : values) {
            TrainingConfig cfg = base;
            cfg.seed = seed;
            if (axis == SweepAxis::beta) {
                cfg.beta = value;
            } else {
                const int dim = static_cast<int>(value);
                require(dim >= 2 && dim % 2 == 0, "latent_dim sweep values must be even and >= 2");
                cfg.layout = LatentLayout::plain(dim / 2, dim / 2);
            }

            Trainer trainer(ds, cfg);
            const TrainResult tr = trainer.run();

            // metrics are read at the selected snapshot
            VaeModel model = load_model(tr.checkpoint);
            const std::vector<int>& vidx = ds.val_idx.empty() ? ds.train_idx : ds.val_idx;
            const Tensor xv = images_to_batch(ds, vidx);
            const PosteriorBatch post = model.encode(xv);
            Rng eval_rng(derive_seed(seed, 0x53EE));
            Tensor noise({post.n(), post.d()});
            for (auto& v : noise.data) v = static_cast<real>(eval_rng.normal());
            const Tensor z = reparameterize(post, noise);
            const KlTerms kl = kl_terms(post, z, post.n());
            const Tensor xp = model.decode(z);
            const double l_rc = recon_loss(xv, xp);

            ClassifierConfig cc = cls_cfg;
            cc.seed = seed;
            const FeatureSet ftr = extract_features(model, ds, SplitKind::train);
            const FeatureSet fva = extract_features(model, ds, SplitKind::val);
            const FeatureSet fte = extract_features(model, ds, SplitKind::test);
            const ClassifierModel cls = train_final(ftr, fva, cc);

            SweepCell cell;
            cell.axis = axis;
            cell.value = value;
            cell.seed = seed;
            cell.tc = kl.tc;
            cell.l_rc = l_rc;
            cell.accuracy = accuracy(cls, fte);
            result.cells.push_back(cell);
        }
    }
    return result;
}

}  // namespace eclf
