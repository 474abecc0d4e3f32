// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eclf/config.hpp"
#include "eclf/eclfcs.hpp"
#include "eclf/explainer.hpp"
#include "eclf/gradcheck.hpp"
#include "eclf/metrics.hpp"
#include "eclf/pipeline.hpp"
#include "eclf/trainer.hpp"

using namespace eclf;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& label, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// the shipped desk-scale defaults, kept in lockstep with the CLI defaults
DatasetSpec synth2_spec(std::uint64_t seed) {
    DatasetSpec spec;
    spec.preset = DataPreset::synth2;
    spec.image_size = 32;
    spec.train_per_class = 150;
    spec.val_per_class = 30;
    spec.test_per_class = 30;
    spec.master_seed = seed;
    return spec;
}

TrainingConfig desk_config(std::uint64_t seed) {
    RunConfig defaults;
    defaults.seed = seed;
    TrainingConfig cfg = defaults.training_config();
    cfg.image_size = 32;
    return cfg;
}

struct TrainedStack {
    Dataset ds;
    Checkpoint ckpt;
    ClassifierModel classifier;
    double cfv_test_accuracy = 0;
    double ncfv_probe_accuracy = 0;
    double initial_val_lrc = 0, final_val_lrc = 0;
    double train_seconds = 0;
};

TrainedStack train_synth2_stack(std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainedStack stack;
    stack.ds = generate_dataset(synth2_spec(seed));
    Trainer trainer(stack.ds, desk_config(seed));
    TrainResult r = trainer.run();
    require(!r.diverged, "acceptance: Synth2 training diverged");
    stack.ckpt = std::move(r.checkpoint);
    stack.initial_val_lrc = r.initial_val_lrc;
    stack.final_val_lrc = r.final_val_lrc;

    const VaeModel model = load_model(stack.ckpt);
    ClassifierConfig cc;
    cc.iterations = 3000;
    cc.eval_interval = 100;
    cc.seed = seed;
    const FeatureSet ftr = extract_features(model, stack.ds, SplitKind::train);
    const FeatureSet fva = extract_features(model, stack.ds, SplitKind::val);
    const FeatureSet fte = extract_features(model, stack.ds, SplitKind::test);
    stack.classifier = train_final(ftr, fva, cc);
    stack.cfv_test_accuracy = accuracy(stack.classifier, fte);

    const FeatureSet ntr = extract_ncfv_features(model, stack.ds, SplitKind::train);
    const FeatureSet nva = extract_ncfv_features(model, stack.ds, SplitKind::val);
    const FeatureSet nte = extract_ncfv_features(model, stack.ds, SplitKind::test);
    const ClassifierModel probe = train_final(ntr, nva, cc);
    stack.ncfv_probe_accuracy = accuracy(probe, nte);
    stack.train_seconds = seconds_since(t0);
    return stack;
}

}  // namespace

// ---------------------------------------------------------------------------

static void criterion_1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetSpec spec = synth2_spec(1);
    spec.train_per_class = 8;
    spec.val_per_class = 2;
    spec.test_per_class = 2;
    const Dataset ds = generate_dataset(spec);
    TrainingConfig cfg = desk_config(1);
    Trainer trainer(ds, cfg);

    const int n = 4;
    std::vector<int> idx(ds.train_idx.begin(), ds.train_idx.begin() + n);
    const Tensor x = images_to_batch(ds, idx);
    const std::vector<int> labels = labels_of(ds, idx);
    Rng noise_rng(17);
    Tensor noise({n, cfg.layout.total_dim});
    for (auto& v : noise.data) v = static_cast<real>(noise_rng.normal());
    const double warm = 1.0;  // every term active

    GradCheckTarget<real> target;
    target.loss = [&] { return trainer.compute_losses(x, labels, noise, warm, false).total; };
    target.backward = [&] {
        trainer.model().store().zero_grads();
        trainer.compute_losses(x, labels, noise, warm, true);
    };
    target.kink_signature = [&] { return trainer.graph_mask_signature(x, labels, noise); };

    Rng probe_rng(23);
    const double err = grad_check(trainer.model().store(), target, 48, 1e-2, probe_rng);
    const double secs = seconds_since(t0);
    std::ostringstream ss;
    ss << "max relative error " << err << " over 48 probes, " << secs << " s";
    report(1, "gradient correctness on the full objective graph", err < 1e-3 && secs < 60.0, ss.str());
}

static void criterion_2_decomposition() {
    const auto t0 = std::chrono::steady_clock::now();
    // frozen 4-dim reference model over a 64-sample dataset
    DatasetSpec spec;
    spec.preset = DataPreset::synth2;
    spec.image_size = 16;
    spec.train_per_class = 32;
    spec.val_per_class = 2;
    spec.test_per_class = 2;
    spec.master_seed = 7;
    const Dataset ds = generate_dataset(spec);
    TrainingConfig cfg;
    cfg.layout = LatentLayout::plain(2, 2);
    cfg.image_size = 16;
    cfg.batch_size = 8;
    cfg.iterations = 200;
    cfg.log_interval = 100;
    cfg.seed = 7;
    Trainer trainer(ds, cfg);
    const TrainResult r = trainer.run();
    const VaeModel model = load_model(r.checkpoint);

    const DecompositionResult d = decomposition_check(model, ds, ds.train_idx, 100000, 7);
    const double secs = seconds_since(t0);
    const bool pass = (d.residual < 0.05 || d.residual < 0.05 * std::fabs(d.lhs)) && secs < 120.0;
    std::ostringstream ss;
    ss << "lhs " << d.lhs << ", rhs " << d.rhs << ", residual " << d.residual << ", " << secs << " s";
    report(2, "three-way KL decomposition identity at 1e5 samples", pass, ss.str());
}

static void criterion_3_tc_oracle() {
    // two-component mixture fixture over a 64-posterior dataset
    const int m = 64, d = 2;
    PosteriorBatch post;
    post.mu = Tensor({m, d});
    post.log_var = Tensor({m, d});
    const double mus[2][2] = {{-1.2, -0.8}, {1.2, 0.8}};
    const double vars[2][2] = {{0.5, 0.7}, {0.8, 0.4}};
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < d; ++k) {
            post.mu[static_cast<std::int64_t>(i) * d + k] = static_cast<real>(mus[i % 2][k]);
            post.log_var[static_cast<std::int64_t>(i) * d + k] =
                static_cast<real>(std::log(vars[i % 2][k]));
        }

    GaussianMixture q;
    q.components.push_back({{mus[0][0], mus[0][1]}, {vars[0][0], vars[0][1]}, 0.0});
    q.components.push_back({{mus[1][0], mus[1][1]}, {vars[1][0], vars[1][1]}, 0.0});
    const double tc_ref = tc_oracle(q);

    Rng rng(33);
    double tc = 0;
    const int rounds = 3000;
    for (int r = 0; r < rounds; ++r) {
        Tensor noise({m, d});
        for (auto& v : noise.data) v = static_cast<real>(rng.normal());
        tc += kl_terms(post, reparameterize(post, noise), m).tc;
    }
    tc /= rounds;
    const bool mixture_ok = std::fabs(tc - tc_ref) < 0.10 * std::fabs(tc_ref);

    GaussianMixture corr;
    corr.components.push_back({{0.0, 0.0}, {1.0, 1.0}, 0.5});
    const double tc_corr = tc_oracle(corr);
    const double closed = -0.5 * std::log(1.0 - 0.25);
    const bool corr_ok = std::fabs(tc_corr - closed) < 0.05 * closed;

    std::ostringstream ss;
    ss << "mixture estimate " << tc << " vs quadrature " << tc_ref << "; rho=0.5 quadrature "
       << tc_corr << " vs closed form " << closed;
    report(3, "TC estimator vs quadrature oracle", mixture_ok && corr_ok, ss.str());
}

static std::vector<TrainedStack> g_stacks;

static void criterion_4_feature_separation() {
    int acc_pass = 0, probe_pass = 0;
    double max_secs = 0;
    std::ostringstream ss;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        g_stacks.push_back(train_synth2_stack(seed));
        const TrainedStack& s = g_stacks.back();
        acc_pass += s.cfv_test_accuracy >= 0.95 ? 1 : 0;
        probe_pass += s.ncfv_probe_accuracy <= 0.60 ? 1 : 0;
        max_secs = std::max(max_secs, s.train_seconds);
        ss << "seed " << seed << ": cfv " << s.cfv_test_accuracy << ", ncfv probe "
           << s.ncfv_probe_accuracy << ", " << s.train_seconds << " s; ";
        require(s.final_val_lrc < s.initial_val_lrc / 2,
                "acceptance: validation l_rc did not halve during training");
    }
    const bool pass = acc_pass >= 2 && probe_pass >= 2 && max_secs < 900.0;
    report(4, "feature separation on Synth2 (3-seed majority)", pass, ss.str());
}

static void criterion_5_beta_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetSpec spec;
    spec.preset = DataPreset::synth4;
    spec.image_size = 32;
    spec.train_per_class = 64;
    spec.val_per_class = 16;
    spec.test_per_class = 16;
    spec.master_seed = 11;
    const Dataset ds = generate_dataset(spec);

    TrainingConfig base = desk_config(1);
    base.iterations = 1200;
    base.log_interval = 100;
    ClassifierConfig cc;
    cc.iterations = 2000;
    cc.eval_interval = 100;

    const SweepResult sweep =
        run_sweep(SweepAxis::beta, {1.0, 4.0, 16.0}, {1, 2, 3}, ds, base, cc);
    int tc_down = 0, lrc_up = 0;
    std::ostringstream ss;
    for (std::uint64_t seed : sweep.seeds) {
        const double t_tc = sweep.trend(seed, "tc");
        const double t_lrc = sweep.trend(seed, "l_rc");
        tc_down += t_tc < 0 ? 1 : 0;
        lrc_up += t_lrc > 0 ? 1 : 0;
        ss << "seed " << seed << ": sp(beta,tc) " << t_tc << ", sp(beta,l_rc) " << t_lrc << "; ";
    }
    const double secs = seconds_since(t0);
    ss << secs << " s";
    report(5, "beta trend on Synth4 (3-seed majority)", tc_down >= 2 && lrc_up >= 2 && secs < 7200.0,
           ss.str());
}

static void criterion_6_dim_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetSpec spec;
    spec.preset = DataPreset::synth4;
    spec.image_size = 32;
    spec.train_per_class = 64;
    spec.val_per_class = 16;
    spec.test_per_class = 16;
    spec.master_seed = 13;
    const Dataset ds = generate_dataset(spec);

    TrainingConfig base = desk_config(1);
    base.iterations = 1200;
    base.log_interval = 100;
    ClassifierConfig cc;
    cc.iterations = 2000;
    cc.eval_interval = 100;

    const SweepResult sweep =
        run_sweep(SweepAxis::latent_dim, {8.0, 16.0, 32.0}, {1, 2, 3}, ds, base, cc);
    int lrc_down = 0, tc_up = 0, acc_ok = 0;
    std::ostringstream ss;
    for (std::uint64_t seed : sweep.seeds) {
        const double t_lrc = sweep.trend(seed, "l_rc");
        const double t_tc = sweep.trend(seed, "tc");
        lrc_down += t_lrc < 0 ? 1 : 0;
        tc_up += t_tc > 0 ? 1 : 0;
        // accuracy non-decreasing within +-2 points between consecutive dims
        std::vector<double> accs;
        for (const auto& c : sweep.cells)
            if (c.seed == seed) accs.push_back(c.accuracy);
        bool ok = true;
        for (std::size_t i = 1; i < accs.size(); ++i) ok &= accs[i] >= accs[i - 1] - 0.02;
        acc_ok += ok ? 1 : 0;
        ss << "seed " << seed << ": sp(dim,l_rc) " << t_lrc << ", sp(dim,tc) " << t_tc << ", acc [";
        for (double a : accs) ss << " " << a;
        ss << " ]; ";
    }
    const double secs = seconds_since(t0);
    ss << secs << " s";
    report(6, "dimensionality trend on Synth4 (3-seed majority)",
           lrc_down >= 2 && tc_up >= 2 && acc_ok >= 2 && secs < 7200.0, ss.str());
}

namespace {

struct ExplainArtifacts {
    ExplanationReport report;
    VaeModel model;
    int query = -1;

    ExplainArtifacts(const TrainedStack& stack, std::uint64_t seed)
        : model(load_model(stack.ckpt)) {
        // a diseased test query the classifier classifies as diseased
        for (int i : stack.ds.test_idx) {
            if (stack.ds.samples[static_cast<std::size_t>(i)].class_id != 1) continue;
            const GaussianPosterior gp =
                model.encode_one(stack.ds.samples[static_cast<std::size_t>(i)].image);
            FeatureVec feat;
            for (int j : model.layout().classifiable_indices())
                feat.push_back(gp.mu[static_cast<std::size_t>(j)]);
            if (stack.classifier.predict(feat).cls == 1) {
                query = i;
                break;
            }
        }
        require(query >= 0, "acceptance: no correctly classified diseased test sample");
        ExplanationQuery q;
        q.pair_budget = 500;  // 1000 boundary points feed the surrogate fit
        q.k_neighbors = 10;
        q.top_n = 3;
        q.seed = seed;
        report = explain(model, stack.classifier, stack.ds, query, q);
    }
};

}  // namespace

static std::vector<ExplainArtifacts> g_explains;

static void criterion_7_boundary_machinery() {
    bool all_valid = true;
    int sign_pass = 0, mse_pass = 0;
    std::ostringstream ss;
    for (std::size_t s = 0; s < g_stacks.size(); ++s) {
        g_explains.emplace_back(g_stacks[s], s + 1);
        const ExplanationReport& rep = g_explains.back().report;
        const TrainedStack& stack = g_stacks[s];

        // re-validate the recorded pair against the live classifier
        const auto& pair = rep.importance.pair_used;
        const auto pa = stack.classifier.predict(pair.a);
        const auto pb = stack.classifier.predict(pair.b);
        double dist = 0;
        for (std::size_t j = 0; j < pair.a.size(); ++j)
            dist += (pair.a[j] - pair.b[j]) * (pair.a[j] - pair.b[j]);
        all_valid &= pa.cls == rep.class_a && pb.cls == rep.class_b && std::sqrt(dist) < 1.0;
        all_valid &= rep.pairs_generated >= 500;

        sign_pass += rep.surrogate.sign_agreement >= 0.90 ? 1 : 0;
        mse_pass += rep.surrogate.gap_mse <= 0.25 * rep.surrogate.gap_variance ? 1 : 0;
        ss << "seed " << (s + 1) << ": pairs " << rep.pairs_generated << "/" << rep.attempts
           << " attempts, sign " << rep.surrogate.sign_agreement << ", gap mse "
           << rep.surrogate.gap_mse << " vs 0.25*var " << 0.25 * rep.surrogate.gap_variance << "; ";
    }
    report(7, "boundary pairs and surrogate quality (3-seed majority)",
           all_valid && sign_pass >= 2 && mse_pass >= 2, ss.str());
}

static void criterion_8_faithfulness() {
    int aligned = 0;
    bool flips = true;
    std::ostringstream ss;
    for (std::size_t s = 0; s < g_explains.size(); ++s) {
        const ExplainArtifacts& art = g_explains[s];
        const TrainedStack& stack = g_stacks[s];

        // alignment of latent features with ground-truth factors over test
        const Tensor xt = images_to_batch(stack.ds, stack.ds.test_idx);
        const PosteriorBatch post = art.model.encode(xt);
        const Tensor feats = art.model.gather_latent(post.mu, art.model.layout().classifiable_indices());
        std::vector<FactorRecord> recs;
        for (int i : stack.ds.test_idx) recs.push_back(*stack.ds.samples[static_cast<std::size_t>(i)].factors);
        const AlignmentMatrix am = factor_alignment(feats, recs);

        const int top_feature = art.report.importance.ranking.front();
        const int best_factor = am.best_factor_for(top_feature);
        const std::string name = am.factor_names[static_cast<std::size_t>(best_factor)];
        const bool class_defining = name == "base_hue" || name == "spot_count";
        aligned += class_defining ? 1 : 0;

        // moving every CFV entry from a to b flips the predicted class
        const auto& pair = art.report.importance.pair_used;
        flips &= stack.classifier.predict(pair.a).cls != stack.classifier.predict(pair.b).cls;
        ss << "seed " << (s + 1) << ": top feature " << top_feature << " aligns with " << name
           << " (" << am.at(best_factor, top_feature) << "); ";
    }
    report(8, "explanation faithfulness (top feature aligns, class flips)", aligned >= 2 && flips,
           ss.str());
}

static void criterion_9_endpoints_and_masks() {
    const ExplainArtifacts& art = g_explains.front();
    const TrainedStack& stack = g_stacks.front();
    const ExplanationReport& rep = art.report;

    // Eq-18 endpoints: the k = 0 and k = 1 frames decode the unmodified
    // origin and the mean-target latent bit-exactly. Recompute the expected
    // frames independently from the recorded anchors.
    const GaussianPosterior gp =
        art.model.encode_one(stack.ds.samples[static_cast<std::size_t>(art.query)].image);
    std::size_t k0 = 0, k1 = 0;
    for (std::size_t i = 0; i < rep.k_grid.size(); ++i) {
        if (rep.k_grid[i] == 0.0) k0 = i;
        if (rep.k_grid[i] == 1.0) k1 = i;
    }
    const std::vector<int> cls_idx = art.model.layout().classifiable_indices();
    auto render = [&](const FeatureVec& feat) {
        std::vector<real> z = gp.mu;
        for (std::size_t k = 0; k < cls_idx.size(); ++k)
            z[static_cast<std::size_t>(cls_idx[k])] = feat[k];
        return art.model.decode_one(z);
    };
    bool endpoints = true;
    int checked = 0;
    for (const auto& strip : rep.strips) {
        const Image expect0 = render(interpolate(strip.origin, strip.target, strip.features, 0.0));
        const Image expect1 = render(interpolate(strip.origin, strip.target, strip.features, 1.0));
        endpoints &= strip.frames[k0].px == expect0.px;
        endpoints &= strip.frames[k1].px == expect1.px;
        ++checked;
    }

    // change-mask checks
    Image a(32, 32), b(32, 32);
    const Image empty_mask = change_mask(a, b);
    bool empty_ok = true;
    for (real v : empty_mask.px) empty_ok &= v == real(0);

    Rng rng(9);
    Image c(32, 32), d(32, 32);
    for (auto& v : d.px) v = static_cast<real>(rng.uniform(0.001, 1.0));
    const Image mask = change_mask(c, d);
    int on = 0;
    for (int i = 0; i < 32 * 32; ++i) on += mask.px[static_cast<std::size_t>(i) * 3] > real(0.5);
    const int expect = static_cast<int>(32 * 32 - std::ceil(0.8 * 32 * 32) + 1);
    const bool fraction_ok = std::abs(on - expect) <= 1 && std::abs(on - 205) <= 2;

    std::ostringstream ss;
    ss << "endpoint frames bit-exact in " << checked << " strips: " << (endpoints ? "yes" : "no")
       << "; empty mask "
       << (empty_ok ? "yes" : "no") << "; distinct-frame mask " << on << "/1024 pixels";
    report(9, "interpolation endpoints and change-mask percentile", endpoints && empty_ok && fraction_ok,
           ss.str());
}

static void criterion_10_class_specific() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = 1;
    const Dataset& ds = g_stacks.front().ds;

    TrainingConfig cfg = desk_config(seed);
    cfg.layout = LatentLayout::class_specific(4, 8, 4);
    Trainer trainer(ds, cfg);
    const TrainResult r = trainer.run();
    require(!r.diverged, "acceptance: class-specific training diverged");
    const VaeModel model = load_model(r.checkpoint);

    // gating invariance, bit-exact
    Rng rng(5);
    std::vector<real> z(static_cast<std::size_t>(model.layout().total_dim));
    for (auto& v : z) v = static_cast<real>(rng.uniform(-2, 2));
    std::vector<real> z2 = z;
    for (int i = model.layout().cfvs2->begin; i < model.layout().cfvs2->end; ++i)
        z2[static_cast<std::size_t>(i)] = static_cast<real>(rng.uniform(-2, 2));
    const bool gating =
        model.decode_one(gate(z, 0, model.layout())).px == model.decode_one(gate(z2, 0, model.layout())).px;

    // merged classifier and end-to-end explanation
    ClassifierConfig cc;
    cc.iterations = 3000;
    cc.eval_interval = 100;
    cc.seed = seed;
    const FeatureSet ftr = extract_features(model, ds, SplitKind::train);
    const FeatureSet fva = extract_features(model, ds, SplitKind::val);
    const FeatureSet fte = extract_features(model, ds, SplitKind::test);
    const ClassifierModel cls = train_final(ftr, fva, cc);
    const double cs_accuracy = accuracy(cls, fte);
    const double eclf_accuracy = g_stacks.front().cfv_test_accuracy;

    int query = -1;
    for (int i : ds.test_idx) {
        const GaussianPosterior gp = model.encode_one(ds.samples[static_cast<std::size_t>(i)].image);
        FeatureVec feat;
        for (int j : model.layout().classifiable_indices())
            feat.push_back(gp.mu[static_cast<std::size_t>(j)]);
        if (cls.predict(feat).cls == ds.samples[static_cast<std::size_t>(i)].class_id) {
            query = i;
            break;
        }
    }
    bool explained = false;
    std::string mode;
    if (query >= 0) {
        ExplanationQuery q;
        q.pair_budget = 100;
        q.k_neighbors = 10;
        q.top_n = 3;
        q.seed = seed;
        const ExplanationReport rep = explain(model, cls, ds, query, q);
        explained = rep.pairs_generated == 100;
        mode = rep.mode;
    }

    const double secs = seconds_since(t0);
    std::ostringstream ss;
    ss << "gating bit-exact: " << (gating ? "yes" : "no") << "; accuracy eclf-cs " << cs_accuracy
       << " vs eclf " << eclf_accuracy << "; explain mode '" << mode << "'; " << secs << " s";
    report(10, "class-specific variant end to end",
           gating && cs_accuracy >= eclf_accuracy - 0.01 - 1e-9 && explained && mode == "eclf-cs",
           ss.str());
}

static void criterion_11_reproducibility() {
    const fs::path out = fs::temp_directory_path() / "eclf_acceptance_repro";
    fs::remove_all(out);

    RunConfig cfg;
    cfg.seed = 19;
    cfg.out_root = out.string();
    cfg.data.image_size = 16;
    cfg.data.train_per_class = 24;
    cfg.data.val_per_class = 6;
    cfg.data.test_per_class = 6;
    cfg.vae_cfv_dim = 4;
    cfg.vae_ncfv_dim = 4;
    cfg.vae_batch_size = 8;
    cfg.vae_iterations = 200;
    cfg.vae_log_interval = 50;
    cfg.cls_iterations = 300;
    cfg.cls_eval_interval = 100;

    const std::string gen1 = run_command("gen-data", cfg);
    const std::string gen2 = run_command("gen-data", cfg);
    const bool data_ok =
        read_text_file((fs::path(gen1) / "dataset" / "manifest.txt").string()) ==
        read_text_file((fs::path(gen2) / "dataset" / "manifest.txt").string());

    cfg.data_path = (fs::path(gen1) / "dataset").string();
    const std::string v1 = run_command("train-vae", cfg);
    const std::string v2 = run_command("train-vae", cfg);
    const bool ckpt_ok = read_text_file((fs::path(v1) / "vae.ckpt").string()) ==
                         read_text_file((fs::path(v2) / "vae.ckpt").string());
    const bool csv_ok = read_text_file((fs::path(v1) / "metrics.csv").string()) ==
                        read_text_file((fs::path(v2) / "metrics.csv").string());

    cfg.vae_checkpoint = (fs::path(v1) / "vae.ckpt").string();
    const std::string c1 = run_command("train-cls", cfg);
    const std::string c2 = run_command("train-cls", cfg);
    const bool cls_ok = read_text_file((fs::path(c1) / "cls.ckpt").string()) ==
                        read_text_file((fs::path(c2) / "cls.ckpt").string());

    std::ostringstream ss;
    ss << "dataset " << (data_ok ? "identical" : "DIFFERS") << ", vae checkpoint "
       << (ckpt_ok ? "identical" : "DIFFERS") << ", metric csv " << (csv_ok ? "identical" : "DIFFERS")
       << ", classifier checkpoint " << (cls_ok ? "identical" : "DIFFERS");
    report(11, "bit-identical reruns under a fixed config and seed",
           data_ok && ckpt_ok && csv_ok && cls_ok, ss.str());
}

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::printf("acceptance suite\n");

    criterion_1_gradients();
    criterion_2_decomposition();
    criterion_3_tc_oracle();
    criterion_4_feature_separation();
    criterion_5_beta_trend();
    criterion_6_dim_trend();
    criterion_7_boundary_machinery();
    criterion_8_faithfulness();
    criterion_9_endpoints_and_masks();
    criterion_10_class_specific();
    criterion_11_reproducibility();

    std::printf("%d of 11 criteria passed (%.1f s total)\n", 11 - g_failures,
                seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
