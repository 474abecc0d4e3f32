#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eclf/metrics.hpp"
#include "eclf/trainer.hpp"

using namespace eclf;

TEST_CASE("tc_oracle closed forms") {
    // product-form mixture: two components sharing the dim-1 marginal and
    // differing only in dim 0 -> joint factorizes -> TC = 0
    GaussianMixture prod;
    prod.components.push_back({{-1.0, 0.3}, {0.5, 0.7}, 0.0});
    prod.components.push_back({{1.5, 0.3}, {0.9, 0.7}, 0.0});
    CHECK(std::fabs(tc_oracle(prod)) < 1e-3);

    // single diagonal component factorizes trivially
    GaussianMixture diag;
    diag.components.push_back({{0.4, -0.2}, {1.2, 0.6}, 0.0});
    CHECK(std::fabs(tc_oracle(diag)) < 1e-6);

    // bivariate Gaussian with rho = 0.5: TC = -ln(1 - 0.25)/2
    GaussianMixture corr;
    corr.components.push_back({{0.0, 0.0}, {1.0, 1.0}, 0.5});
    CHECK(tc_oracle(corr) == doctest::Approx(-0.5 * std::log(0.75)).epsilon(1e-3));
    CHECK(tc_oracle(corr) == doctest::Approx(0.14384).epsilon(1e-2));
}

TEST_CASE("tc_oracle agrees with Monte Carlo on an arbitrary mixture") {
    GaussianMixture q;
    q.components.push_back({{-1.5, -0.5}, {0.6, 1.1}, 0.3});
    q.components.push_back({{1.0, 1.8}, {0.8, 0.4}, 0.0});
    const double quad = tc_oracle(q);
    Rng rng(31);
    const double mc = tc_monte_carlo(q, 1000000, rng);
    CHECK(std::fabs(quad - mc) < 0.02 * std::max(1.0, std::fabs(quad)));
}

TEST_CASE("tc_oracle is non-negative up to quadrature error") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        GaussianMixture q;
        const int k = 1 + static_cast<int>(rng.below(3));
        for (int i = 0; i < k; ++i)
            q.components.push_back({{rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                    {rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5)},
                                    0.0});
        CHECK(tc_oracle(q) > -1e-3);
    }
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
    // monotone but nonlinear is still a perfect rank correlation
    CHECK(spearman({1, 2, 3, 4}, {1, 10, 100, 1000}) == doctest::Approx(1.0));
    // ties get average ranks
    const double r = spearman({1, 1, 2, 3}, {5, 5, 6, 7});
    CHECK(r == doctest::Approx(1.0));
}

TEST_CASE("factor alignment") {
    Rng rng(5);
    const int n = 500;
    std::vector<FactorRecord> records(n);
    Tensor latents({n, 3});
    for (int i = 0; i < n; ++i) {
        auto& f = records[static_cast<std::size_t>(i)];
        f.base_hue = rng.uniform(0, 1);
        f.spot_count = static_cast<int>(rng.below(8));
        f.spot_radius = rng.uniform(1, 3);
        f.spot_darkness = rng.uniform(0, 1);
        f.shape_eccentricity = rng.uniform(0, 1);
        latents[static_cast<std::int64_t>(i) * 3 + 0] = static_cast<real>(2.0 * f.base_hue - 1.0);
        latents[static_cast<std::int64_t>(i) * 3 + 1] =
            static_cast<real>(std::tanh(f.shape_eccentricity * 3.0));  // monotone warp
        latents[static_cast<std::int64_t>(i) * 3 + 2] = static_cast<real>(rng.uniform(-1, 1));
    }
    const AlignmentMatrix m = factor_alignment(latents, records);
    CHECK(m.at(0, 0) == doctest::Approx(1.0));       // copied factor scores 1.0
    CHECK(m.at(4, 1) == doctest::Approx(1.0));       // monotone warp still scores 1.0
    CHECK(m.best_factor_for(0) == 0);
    CHECK(m.best_factor_for(1) == 4);
    for (int f = 0; f < 5; ++f) CHECK(m.at(f, 2) < 0.2);  // noise dim aligns with nothing

    // permuting latent columns permutes the matrix columns identically
    Tensor permuted({n, 3});
    for (int i = 0; i < n; ++i) {
        permuted[static_cast<std::int64_t>(i) * 3 + 0] = latents[static_cast<std::int64_t>(i) * 3 + 2];
        permuted[static_cast<std::int64_t>(i) * 3 + 1] = latents[static_cast<std::int64_t>(i) * 3 + 0];
        permuted[static_cast<std::int64_t>(i) * 3 + 2] = latents[static_cast<std::int64_t>(i) * 3 + 1];
    }
    const AlignmentMatrix mp = factor_alignment(permuted, records);
    for (int f = 0; f < 5; ++f) {
        CHECK(mp.at(f, 1) == doctest::Approx(m.at(f, 0)));
        CHECK(mp.at(f, 2) == doctest::Approx(m.at(f, 1)));
        CHECK(mp.at(f, 0) == doctest::Approx(m.at(f, 2)));
    }
}

TEST_CASE("decomposition check: N = 1 diagnostic is exact") {
    PosteriorBatch post;
    post.mu = Tensor({1, 4}, {0.5f, -1.0f, 0.0f, 2.0f});
    post.log_var = Tensor({1, 4}, {0.0f, -0.5f, 0.3f, 0.0f});
    const DecompositionResult r = decomposition_check_posteriors(post, 100, 3);
    CHECK(r.residual < 1e-12);  // Eq. (13) with a degenerate aggregate; fp summation only
}

TEST_CASE("sweep: single cell, determinism") {
    DatasetSpec spec;
    spec.preset = DataPreset::synth2;
    spec.image_size = 16;
    spec.train_per_class = 24;
    spec.val_per_class = 6;
    spec.test_per_class = 6;
    spec.master_seed = 3;
    const Dataset ds = generate_dataset(spec);

    TrainingConfig base;
    base.layout = LatentLayout::plain(4, 4);
    base.image_size = 16;
    base.batch_size = 8;
    base.iterations = 60;
    base.log_interval = 30;

    ClassifierConfig cc;
    cc.iterations = 200;
    cc.eval_interval = 50;

    const SweepResult a = run_sweep(SweepAxis::beta, {2.0}, {11}, ds, base, cc);
    REQUIRE(a.cells.size() == 1);  // single value, single seed -> one record
    CHECK(a.cells[0].value == 2.0);
    CHECK(a.cells[0].seed == 11);
    CHECK(std::isfinite(a.cells[0].tc));
    CHECK(std::isfinite(a.cells[0].l_rc));
    CHECK(a.cells[0].accuracy >= 0.0);

    const SweepResult b = run_sweep(SweepAxis::beta, {2.0}, {11}, ds, base, cc);
    CHECK(a.cells[0].tc == b.cells[0].tc);  // rerunning a cell reproduces it bit-exactly
    CHECK(a.cells[0].l_rc == b.cells[0].l_rc);
    CHECK(a.cells[0].accuracy == b.cells[0].accuracy);

    const std::string csv = sweep_csv(a);
    CHECK(csv.find("beta,2,11") != std::string::npos);
}
