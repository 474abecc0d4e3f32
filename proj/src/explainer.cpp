#include "eclf/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "eclf/eclfcs.hpp"
#include "eclf/trainer.hpp"

namespace fs = std::filesystem;

namespace eclf {

void ExplanationQuery::validate() const {
    require(k_neighbors >= 1, "explanation query: k_neighbors must be >= 1");
    require(pair_budget >= 10, "explanation query: pair_budget must be >= 10");
    require(coarse_steps >= 2, "explanation query: coarse_steps must be >= 2");
    require(tau_rel > 0, "explanation query: tau_rel must be positive");
    require(retry_factor >= 1, "explanation query: retry_factor must be >= 1");
    require(k_grid.size() >= 2, "explanation query: k grid needs at least 2 values");
    require(std::is_sorted(k_grid.begin(), k_grid.end()),
            "explanation query: k grid must be sorted ascending");
    bool has0 = false, has1 = false;
    for (double k : k_grid) {
        has0 |= k == 0.0;
        has1 |= k == 1.0;
    }
    require(has0 && has1, "explanation query: k grid must contain 0 and 1");
    if (class_a >= 0 && class_b >= 0)
        require(class_a != class_b, "explanation query: contrast class must differ from class A");
}

std::vector<int> knearest(const FeatureVec& query, const Tensor& candidates, int k) {
    require(candidates.ndim() == 2, "knearest: candidates must be [N x F]");
    const int n = candidates.dim(0), f = candidates.dim(1);
    require(n >= 1, "knearest: candidate set is empty");
    require(static_cast<int>(query.size()) == f, "knearest: query length mismatch");
    require(k >= 1 && k <= n, "knearest: K = " + std::to_string(k) + " exceeds candidate count " +
                                  std::to_string(n));

    std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double d2 = 0;
        for (int j = 0; j < f; ++j) {
            const double d = static_cast<double>(candidates[static_cast<std::int64_t>(i) * f + j]) -
                             static_cast<double>(query[static_cast<std::size_t>(j)]);
            d2 += d * d;
        }
        dist[static_cast<std::size_t>(i)] = {d2, i};
    }
    std::sort(dist.begin(), dist.end());  // ties resolve to the lower index
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
    return out;
}

std::pair<FeatureVec, FeatureVec> sample_points(const FeaturePosterior& query_post,
                                                const std::vector<FeaturePosterior>& neighbors,
                                                Rng& rng) {
    require(!neighbors.empty(), "sample_points: neighbor set is empty");
    const std::size_t f = query_post.mu.size();
    FeatureVec point_a(f);
    for (std::size_t j = 0; j < f; ++j)
        point_a[j] = query_post.mu[j] +
                     std::exp(query_post.log_var[j] / real(2)) * static_cast<real>(rng.normal());

    FeatureVec point_b(f, real(0));
    for (const auto& nb : neighbors) {
        require(nb.mu.size() == f, "sample_points: neighbor dimension mismatch");
        for (std::size_t j = 0; j < f; ++j)
            point_b[j] += nb.mu[j] + std::exp(nb.log_var[j] / real(2)) * static_cast<real>(rng.normal());
    }
    for (auto& v : point_b) v /= static_cast<real>(neighbors.size());
    return {point_a, point_b};
}

namespace {

int argmax(const std::vector<real>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return best;
}

FeatureVec lerp_vec(const FeatureVec& a, const FeatureVec& b, double t) {
    FeatureVec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = a[i] + static_cast<real>(t) * (b[i] - a[i]);
    return out;
}

double norm_diff(const FeatureVec& a, const FeatureVec& b) {
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        d2 += d * d;
    }
    return std::sqrt(d2);
}

}  // namespace

std::optional<BoundaryPair> cross_boundary(const FeatureVec& point_a, const FeatureVec& point_b,
                                           int class_a, int class_b, const LogitsFn& logits,
                                           int coarse_steps, double tau_rel) {
    require(point_a.size() == point_b.size(), "cross_boundary: dimension mismatch");
    auto predict = [&](const FeatureVec& p) { return argmax(logits(p)); };
    require(predict(point_a) == class_a, "cross_boundary: point A is not classified as class A");
    if (predict(point_b) != class_b) return std::nullopt;  // NotCrossing

    // coarse scan for the first step that leaves class A
    double lo_t = 0.0, hi_t = 1.0;
    bool found = false;
    for (int i = 1; i <= coarse_steps; ++i) {
        const double t = static_cast<double>(i) / coarse_steps;
        if (predict(lerp_vec(point_a, point_b, t)) != class_a) {
            lo_t = static_cast<double>(i - 1) / coarse_steps;
            hi_t = t;
            found = true;
            break;
        }
    }
    if (!found) return std::nullopt;  // numerically never left class A

    const double tau = tau_rel * norm_diff(point_a, point_b);
    FeatureVec lo = lerp_vec(point_a, point_b, lo_t);
    FeatureVec hi = lerp_vec(point_a, point_b, hi_t);
    while (norm_diff(lo, hi) > tau) {
        const FeatureVec mid = lerp_vec(lo, hi, 0.5);
        if (predict(mid) == class_a)
            lo = mid;
        else
            hi = mid;
    }
    if (predict(hi) != class_b) return std::nullopt;  // crossed into a third class

    BoundaryPair pair;
    pair.a = lo;
    pair.b = hi;
    const std::vector<real> la = logits(lo), lb = logits(hi);
    pair.gap_a = static_cast<double>(la[static_cast<std::size_t>(class_a)]) -
                 static_cast<double>(la[static_cast<std::size_t>(class_b)]);
    pair.gap_b = static_cast<double>(lb[static_cast<std::size_t>(class_a)]) -
                 static_cast<double>(lb[static_cast<std::size_t>(class_b)]);
    return pair;
}

namespace {

/// Gaussian elimination with partial pivoting on the (F+1)x(F+1) normal
/// equations; returns false on a vanishing pivot.
bool solve_inplace(std::vector<double>& a, std::vector<double>& rhs, int n, int nrhs) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[static_cast<std::size_t>(r) * n + col]) >
                std::fabs(a[static_cast<std::size_t>(pivot) * n + col]))
                pivot = r;
        if (std::fabs(a[static_cast<std::size_t>(pivot) * n + col]) < 1e-12) return false;
        if (pivot != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<std::size_t>(col) * n + c],
                          a[static_cast<std::size_t>(pivot) * n + c]);
            for (int c = 0; c < nrhs; ++c)
                std::swap(rhs[static_cast<std::size_t>(col) * nrhs + c],
                          rhs[static_cast<std::size_t>(pivot) * nrhs + c]);
        }
        const double inv = 1.0 / a[static_cast<std::size_t>(col) * n + col];
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = a[static_cast<std::size_t>(r) * n + col] * inv;
            if (factor == 0.0) continue;
            for (int c = col; c < n; ++c)
                a[static_cast<std::size_t>(r) * n + c] -=
                    factor * a[static_cast<std::size_t>(col) * n + c];
            for (int c = 0; c < nrhs; ++c)
                rhs[static_cast<std::size_t>(r) * nrhs + c] -=
                    factor * rhs[static_cast<std::size_t>(col) * nrhs + c];
        }
    }
    for (int r = 0; r < n; ++r) {
        const double inv = 1.0 / a[static_cast<std::size_t>(r) * n + r];
        for (int c = 0; c < nrhs; ++c) rhs[static_cast<std::size_t>(r) * nrhs + c] *= inv;
    }
    return true;
}

}  // namespace

LinearSurrogate fit_surrogate(const std::vector<FeatureVec>& points, const Tensor& targets) {
    require(!points.empty(), "fit_surrogate: no points");
    const int p = static_cast<int>(points.size());
    const int f = static_cast<int>(points[0].size());
    require(targets.ndim() == 2 && targets.dim(0) == p && targets.dim(1) == 2,
            "fit_surrogate: targets must be [P x 2]");

    // every fifth point is held out for the diagnostics
    std::vector<int> fit_idx, held_idx;
    for (int i = 0; i < p; ++i) (i % 5 == 4 ? held_idx : fit_idx).push_back(i);
    if (held_idx.empty()) held_idx = fit_idx;

    const int n = f + 1;  // plus bias column
    std::vector<double> xtx(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> xty(static_cast<std::size_t>(n) * 2, 0.0);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i : fit_idx) {
        for (int j = 0; j < f; ++j) row[static_cast<std::size_t>(j)] = points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        row[static_cast<std::size_t>(f)] = 1.0;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b)
                xtx[static_cast<std::size_t>(a) * n + b] += row[static_cast<std::size_t>(a)] * row[static_cast<std::size_t>(b)];
            for (int c = 0; c < 2; ++c)
                xty[static_cast<std::size_t>(a) * 2 + c] +=
                    row[static_cast<std::size_t>(a)] *
                    static_cast<double>(targets[static_cast<std::int64_t>(i) * 2 + c]);
        }
    }

    std::vector<double> a = xtx, rhs = xty;
    if (!solve_inplace(a, rhs, n, 2)) {
        // rank-deficient design: ridge fallback scaled to the diagonal
        double trace = 0;
        for (int i = 0; i < n; ++i) trace += xtx[static_cast<std::size_t>(i) * n + i];
        const double ridge = std::max(1e-12, 1e-8 * trace / n);
        a = xtx;
        rhs = xty;
        for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] += ridge;
        require(solve_inplace(a, rhs, n, 2), "fit_surrogate: singular design even with ridge");
    }

    LinearSurrogate s;
    s.weights = Tensor({2, f});
    s.bias.resize(2);
    for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < f; ++j)
            s.weights[static_cast<std::int64_t>(c) * f + j] =
                static_cast<real>(rhs[static_cast<std::size_t>(j) * 2 + c]);
        s.bias[static_cast<std::size_t>(c)] = static_cast<real>(rhs[static_cast<std::size_t>(f) * 2 + c]);
    }

    // held-out diagnostics
    double mse = 0, gap_mse = 0, gap_mean = 0, gap_sq = 0;
    int agree = 0;
    for (int i : held_idx) {
        double pred[2];
        for (int c = 0; c < 2; ++c) {
            double acc = s.bias[static_cast<std::size_t>(c)];
            for (int j = 0; j < f; ++j)
                acc += static_cast<double>(s.weights[static_cast<std::int64_t>(c) * f + j]) *
                       static_cast<double>(points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            pred[c] = acc;
            const double err = acc - static_cast<double>(targets[static_cast<std::int64_t>(i) * 2 + c]);
            mse += err * err;
        }
        const double tgap = static_cast<double>(targets[static_cast<std::int64_t>(i) * 2]) -
                            static_cast<double>(targets[static_cast<std::int64_t>(i) * 2 + 1]);
        const double pgap = pred[0] - pred[1];
        gap_mse += (pgap - tgap) * (pgap - tgap);
        gap_mean += tgap;
        gap_sq += tgap * tgap;
        agree += ((pgap >= 0) == (tgap >= 0)) ? 1 : 0;
    }
    const double h = static_cast<double>(held_idx.size());
    s.fit_mse = mse / (2.0 * h);
    s.gap_mse = gap_mse / h;
    gap_mean /= h;
    s.gap_variance = gap_sq / h - gap_mean * gap_mean;
    s.sign_agreement = agree / h;
    return s;
}

std::vector<double> importance(const std::vector<real>& w_a, const FeatureVec& cfv_a,
                               const FeatureVec& cfv_b) {
    require(w_a.size() == cfv_a.size() && cfv_a.size() == cfv_b.size(),
            "importance: dimension mismatch");
    std::vector<double> im(w_a.size());
    for (std::size_t i = 0; i < w_a.size(); ++i)
        im[i] = static_cast<double>(w_a[i]) *
                (static_cast<double>(cfv_a[i]) - static_cast<double>(cfv_b[i]));
    return im;
}

std::vector<int> importance_ranking(const std::vector<double>& im) {
    std::vector<int> order(im.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::fabs(im[static_cast<std::size_t>(a)]) > std::fabs(im[static_cast<std::size_t>(b)]);
    });
    return order;
}

FeatureVec interpolate(const FeatureVec& origin, const FeatureVec& target,
                       const std::vector<int>& selected, double k) {
    require(origin.size() == target.size(), "interpolate: dimension mismatch");
    FeatureVec out = origin;
    for (int idx : selected) {
        require(idx >= 0 && idx < static_cast<int>(origin.size()), "interpolate: index out of range");
        const std::size_t i = static_cast<std::size_t>(idx);
        out[i] = origin[i] - static_cast<real>((static_cast<double>(origin[i]) -
                                                static_cast<double>(target[i])) * k);
    }
    return out;
}

Image change_mask(const Image& frame_a, const Image& frame_b) {
    require(frame_a.h == frame_b.h && frame_a.w == frame_b.w, "change_mask: frame size mismatch");
    const int n = frame_a.h * frame_a.w;
    std::vector<double> diff(static_cast<std::size_t>(n));
    for (int y = 0; y < frame_a.h; ++y)
        for (int x = 0; x < frame_a.w; ++x) {
            double d = 0;
            for (int c = 0; c < 3; ++c)
                d += std::fabs(static_cast<double>(frame_a.at(y, x, c)) -
                               static_cast<double>(frame_b.at(y, x, c)));
            diff[static_cast<std::size_t>(y * frame_a.w + x)] = d;
        }

    // nearest-rank 80th percentile: the ceil(0.8 n)-th smallest value
    std::vector<double> sorted = diff;
    std::sort(sorted.begin(), sorted.end());
    const int rank = static_cast<int>(std::ceil(0.8 * n));
    const double threshold = sorted[static_cast<std::size_t>(std::max(0, rank - 1))];

    Image mask(frame_a.h, frame_a.w);
    for (int i = 0; i < n; ++i) {
        const bool on = diff[static_cast<std::size_t>(i)] >= threshold &&
                        diff[static_cast<std::size_t>(i)] > 0.0;
        for (int c = 0; c < 3; ++c)
            mask.px[static_cast<std::size_t>(i) * 3 + c] = on ? real(1) : real(0);
    }
    return mask;
}

namespace {

FeaturePosterior feature_posterior(const VaeModel& model, const GaussianPosterior& post) {
    const std::vector<int> idx = model.layout().classifiable_indices();
    FeaturePosterior fp;
    for (int i : idx) {
        fp.mu.push_back(post.mu[static_cast<std::size_t>(i)]);
        fp.log_var.push_back(post.log_var[static_cast<std::size_t>(i)]);
    }
    return fp;
}

/// Renders one latent whose classifiable features are `feat`, all other
/// entries held at the query posterior's mean. Class-specific layouts gate
/// the slice opposite to `source_slice` to zero before decoding.
Image render_features(const VaeModel& model, const GaussianPosterior& query_full,
                      const FeatureVec& feat, int source_slice) {
    const LatentLayout& layout = model.layout();
    const std::vector<int> idx = layout.classifiable_indices();
    std::vector<real> z = query_full.mu;
    for (std::size_t k = 0; k < idx.size(); ++k)
        z[static_cast<std::size_t>(idx[k])] = feat[k];
    if (layout.is_class_specific()) z = gate(z, source_slice == 0 ? 0 : 1, layout);
    return model.decode_one(z);
}

}  // namespace

ExplanationReport explain(const VaeModel& model, const ClassifierModel& classifier,
                          const Dataset& ds, int query_sample_index, const ExplanationQuery& query) {
    query.validate();
    require(query_sample_index >= 0 &&
                query_sample_index < static_cast<int>(ds.samples.size()),
            "explain: query sample index out of range");
    const int feat_dim = model.layout().classifiable_dim();
    require(classifier.input_dim() == feat_dim,
            "explain: classifier input width does not match the latent layout");

    ExplanationReport report;
    report.mode = model.layout().is_class_specific() ? "eclf-cs" : "eclf";
    report.query_index = query_sample_index;
    report.k_grid = query.k_grid;

    // stage 1: classify the query from its posterior mean features
    const GaussianPosterior query_full =
        model.encode_one(ds.samples[static_cast<std::size_t>(query_sample_index)].image);
    const FeaturePosterior query_post = feature_posterior(model, query_full);
    const ClassifierModel::Prediction pred = classifier.predict(query_post.mu);
    report.query_logits = pred.logits;

    const int class_a = query.class_a >= 0 ? query.class_a : pred.cls;
    int class_b = query.class_b;
    if (class_b < 0) {
        // contrast class: the second-highest logit
        class_b = class_a == 0 ? 1 : 0;
        for (int c = 0; c < classifier.classes(); ++c) {
            if (c == class_a) continue;
            if (pred.logits[static_cast<std::size_t>(c)] >
                pred.logits[static_cast<std::size_t>(class_b)])
                class_b = c;
        }
    }
    require(class_a != class_b, "explain: contrast class equals the predicted class");
    require(class_a >= 0 && class_a < classifier.classes() && class_b >= 0 &&
                class_b < classifier.classes(),
            "explain: class out of range");
    report.class_a = class_a;
    report.class_b = class_b;

    // class-B training samples provide the K-nearest neighborhood
    std::vector<int> class_b_rows;
    for (int i : ds.train_idx)
        if (ds.samples[static_cast<std::size_t>(i)].class_id == class_b) class_b_rows.push_back(i);
    require(!class_b_rows.empty(), "explain: no training samples carry the contrast class");
    require(query.k_neighbors <= static_cast<int>(class_b_rows.size()),
            "explain: K exceeds the contrast-class sample count");

    const Tensor xb = images_to_batch(ds, class_b_rows);
    const PosteriorBatch post_b = model.encode(xb);
    const std::vector<int> cls_idx = model.layout().classifiable_indices();
    const Tensor feat_b = model.gather_latent(post_b.mu, cls_idx);

    const std::vector<int> nn = knearest(query_post.mu, feat_b, query.k_neighbors);
    std::vector<FeaturePosterior> neighbors;
    for (int row : nn) {
        FeaturePosterior fp;
        for (int j : cls_idx) {
            fp.mu.push_back(post_b.mu[static_cast<std::int64_t>(row) * model.layout().total_dim + j]);
            fp.log_var.push_back(
                post_b.log_var[static_cast<std::int64_t>(row) * model.layout().total_dim + j]);
        }
        neighbors.push_back(std::move(fp));
    }

    LogitsFn logits = [&](const FeatureVec& v) { return classifier.predict(v).logits; };
    auto predict_cls = [&](const FeatureVec& v) { return argmax(logits(v)); };

    // stages 2-3, repeated to the pair budget
    Rng rng(derive_seed(query.seed, 0xE891));
    std::vector<BoundaryPair> pairs;
    FeatureVec first_point_b;
    int attempts = 0;
    const int attempt_cap = query.retry_factor * query.pair_budget;
    int a_side_rejects = 0, b_side_rejects = 0, no_cross = 0;
    while (static_cast<int>(pairs.size()) < query.pair_budget && attempts < attempt_cap) {
        ++attempts;
        auto [point_a, point_b] = sample_points(query_post, neighbors, rng);
        if (predict_cls(point_a) != class_a) {
            ++a_side_rejects;
            continue;
        }
        if (predict_cls(point_b) != class_b) {
            ++b_side_rejects;
            continue;
        }
        const auto pair = cross_boundary(point_a, point_b, class_a, class_b, logits,
                                         query.coarse_steps, query.tau_rel);
        if (!pair) {
            ++no_cross;
            continue;
        }
        if (pairs.empty()) first_point_b = point_b;
        pairs.push_back(*pair);
    }
    if (static_cast<int>(pairs.size()) < query.pair_budget) {
        std::ostringstream ss;
        ss << "explain: pair budget unreachable (" << pairs.size() << "/" << query.pair_budget
           << " after " << attempts << " attempts; " << a_side_rejects
           << " rejected on the A side, " << b_side_rejects << " on the B side, " << no_cross
           << " without a crossing). The classes may be locally inseparable around this query.";
        throw std::runtime_error(ss.str());
    }
    report.pairs_generated = static_cast<int>(pairs.size());
    report.attempts = attempts;

    // stage 4: linear surrogate over both endpoints of every pair
    std::vector<FeatureVec> points;
    points.reserve(pairs.size() * 2);
    for (const auto& pr : pairs) {
        points.push_back(pr.a);
        points.push_back(pr.b);
    }
    Tensor targets({static_cast<int>(points.size()), 2});
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::vector<real> l = logits(points[i]);
        targets[static_cast<std::int64_t>(i) * 2] = l[static_cast<std::size_t>(class_a)];
        targets[static_cast<std::int64_t>(i) * 2 + 1] = l[static_cast<std::size_t>(class_b)];
    }
    report.surrogate = fit_surrogate(points, targets);

    // Eq-style importance from the first boundary pair
    std::vector<real> w_a(static_cast<std::size_t>(feat_dim));
    for (int j = 0; j < feat_dim; ++j) w_a[static_cast<std::size_t>(j)] = report.surrogate.weights[j];
    report.importance.pair_used = pairs.front();
    report.importance.im = importance(w_a, pairs.front().a, pairs.front().b);
    report.importance.ranking = importance_ranking(report.importance.im);

    for (int j = 0; j < feat_dim; ++j)
        report.feature_sources.push_back(feature_source(model.layout(), j));

    const int top_n = query.top_n > 0 ? query.top_n : std::min(10, feat_dim);
    require(top_n <= feat_dim, "explain: top_n exceeds the feature dimension");

    // stage 5: traversal strips from both anchors, plus change masks.
    // "A_to_B" interpolates the query's own features toward the mean
    // K-nearest point; "a_to_b" moves between the boundary pair.
    struct Anchor {
        std::string name;
        FeatureVec origin, target;
    };
    const std::vector<Anchor> anchors = {
        {"A_to_B", query_post.mu, first_point_b},
        {"a_to_b", pairs.front().a, pairs.front().b},
    };
    for (const auto& anchor : anchors) {
        for (int t = 0; t <= top_n; ++t) {
            TraversalStrip strip;
            strip.anchor = anchor.name;
            strip.origin = anchor.origin;
            strip.target = anchor.target;
            if (t < top_n) {
                strip.features = {report.importance.ranking[static_cast<std::size_t>(t)]};
            } else {
                for (int g = 0; g < top_n; ++g)
                    strip.features.push_back(report.importance.ranking[static_cast<std::size_t>(g)]);
            }
            strip.source = feature_source(model.layout(), strip.features.front());
            for (double k : query.k_grid) {
                const FeatureVec feat = interpolate(anchor.origin, anchor.target, strip.features, k);
                strip.frames.push_back(render_features(model, query_full, feat, strip.source));
            }
            strip.mask = change_mask(strip.frames.front(), strip.frames.back());
            report.strips.push_back(std::move(strip));
        }
    }
    return report;
}

void write_report(const ExplanationReport& report, const std::string& dir) {
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "mode = " << report.mode << "\n";
    manifest << "query_index = " << report.query_index << "\n";
    manifest << "class_a = " << report.class_a << "\n";
    manifest << "class_b = " << report.class_b << "\n";
    manifest << "pairs = " << report.pairs_generated << "\n";
    manifest << "attempts = " << report.attempts << "\n";
    {
        manifest << "k_grid = ";
        for (std::size_t i = 0; i < report.k_grid.size(); ++i)
            manifest << (i ? "," : "") << fmt_real(report.k_grid[i]);
        manifest << "\n";
    }
    manifest << "surrogate_fit_mse = " << fmt_real(report.surrogate.fit_mse) << "\n";
    manifest << "surrogate_gap_mse = " << fmt_real(report.surrogate.gap_mse) << "\n";
    manifest << "surrogate_gap_variance = " << fmt_real(report.surrogate.gap_variance) << "\n";
    manifest << "surrogate_sign_agreement = " << fmt_real(report.surrogate.sign_agreement) << "\n";
    {
        manifest << "importance = ";
        for (std::size_t i = 0; i < report.importance.im.size(); ++i)
            manifest << (i ? "," : "") << fmt_real(report.importance.im[i]);
        manifest << "\n";
        manifest << "ranking = ";
        for (std::size_t i = 0; i < report.importance.ranking.size(); ++i)
            manifest << (i ? "," : "") << report.importance.ranking[i];
        manifest << "\n";
    }
    if (report.mode == "eclf-cs") {
        manifest << "feature_sources = ";
        for (std::size_t i = 0; i < report.feature_sources.size(); ++i)
            manifest << (i ? "," : "") << (report.feature_sources[i] == 0 ? "cfvs1" : "cfvs2");
        manifest << "\n";
    }

    for (const auto& strip : report.strips) {
        std::string tag = "q" + std::to_string(report.query_index) + "_" + strip.anchor + "_";
        tag += strip.features.size() == 1 ? "f" + std::to_string(strip.features.front()) : "group";
        const std::string strip_file = tag + ".png";
        const std::string mask_file = tag + "_mask.png";
        write_png((fs::path(dir) / strip_file).string(), hstack_frames(strip.frames));
        write_png((fs::path(dir) / mask_file).string(), strip.mask);
        manifest << "strip = " << strip_file << "|" << strip.anchor << "|";
        for (std::size_t i = 0; i < strip.features.size(); ++i)
            manifest << (i ? "," : "") << strip.features[i];
        manifest << "|" << mask_file;
        if (report.mode == "eclf-cs")
            manifest << "|" << (strip.source == 0 ? "cfvs1" : "cfvs2");
        manifest << "\n";
    }
    write_text_file((fs::path(dir) / "report.txt").string(), manifest.str());
}

}  // namespace eclf
