#include "eclf/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "eclf/eclfcs.hpp"
#include "eclf/heads.hpp"

namespace fs = std::filesystem;

namespace eclf {

std::string metric_csv_header() { return "iteration,l_rc,l_rd,l_d,l_s,index_mi,tc,dkl,total"; }

std::string metric_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream ss;
    ss << metric_csv_header() << "\n";
    for (const auto& r : rows) {
        const auto& l = r.losses;
        ss << r.iteration << "," << fmt_real(l.l_rc) << "," << fmt_real(l.l_rd) << ","
           << fmt_real(l.l_d) << "," << fmt_real(l.l_s) << "," << fmt_real(l.index_mi) << ","
           << fmt_real(l.tc) << "," << fmt_real(l.dkl) << "," << fmt_real(l.total) << "\n";
    }
    return ss.str();
}

Tensor images_to_batch(const Dataset& ds, const std::vector<int>& idx) {
    require(!idx.empty(), "images_to_batch: empty index list");
    const int s = ds.image_size;
    Tensor x({static_cast<int>(idx.size()), 3, s, s});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const Image& img = ds.samples[static_cast<std::size_t>(idx[b])].image;
        require(img.h == s && img.w == s, "images_to_batch: sample size mismatch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < s; ++y)
                for (int xx = 0; xx < s; ++xx)
                    x[((static_cast<std::int64_t>(b) * 3 + c) * s + y) * s + xx] = img.at(y, xx, c);
    }
    return x;
}

std::vector<int> labels_of(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.samples[static_cast<std::size_t>(i)].class_id);
    return out;
}

Trainer::Trainer(const Dataset& ds, TrainingConfig cfg) : ds_(ds) { init_from_config(std::move(cfg)); }

Trainer::Trainer(const Dataset& ds, const Checkpoint& resume_from) : ds_(ds) {
    init_from_config(TrainingConfig::from_text(resume_from.config_text));
    load_state(resume_from);
}

void Trainer::init_from_config(TrainingConfig cfg) {
    require(!ds_.train_idx.empty(), "training requires a nonempty train split");
    if (cfg.dataset_size == 0) cfg.dataset_size = static_cast<std::int64_t>(ds_.train_idx.size());
    cfg.num_classes = ds_.num_classes();
    cfg.image_size = ds_.image_size;
    if (cfg.layout.is_class_specific())
        require(ds_.num_classes() == 2,
                "class-specific training supports exactly 2 classes, dataset has " +
                    std::to_string(ds_.num_classes()));
    cfg.validate();
    require(cfg.dataset_size >= cfg.batch_size, "dataset_size must be >= batch_size");
    require(static_cast<std::int64_t>(ds_.train_idx.size()) >= cfg.batch_size,
            "train split smaller than batch size");

    cfg_ = cfg;
    model_ = std::make_unique<VaeModel>(cfg_);
    extractor_ = PerceptualExtractor::frozen_random(derive_seed(cfg_.seed, 0xFEA7));
    OptimizerConfig oc;
    oc.learning_rate = cfg_.learning_rate;
    opt_ = Optimizer<real>(oc, model_->store());
    OptimizerConfig dc = oc;
    if (cfg_.disc_learning_rate > 0) dc.learning_rate = cfg_.disc_learning_rate;
    disc_opt_ = Optimizer<real>(dc, model_->store());
    rng_ = Rng(derive_seed(cfg_.seed, 0x7124));
}

void Trainer::load_state(const Checkpoint& ckpt) {
    auto& store = model_->store();
    for (auto& p : store.params) {
        const Tensor* t = ckpt.find("param." + p.name);
        require(t != nullptr, "checkpoint missing parameter '" + p.name + "'");
        require(t->shape == p.value.shape, "checkpoint shape mismatch for '" + p.name + "'");
        p.value = *t;
    }
    for (std::size_t i = 0; i < store.params.size(); ++i) {
        const auto& name = store.params[i].name;
        const Tensor* m = ckpt.find("opt.m." + name);
        const Tensor* v = ckpt.find("opt.v." + name);
        require(m && v, "checkpoint missing optimizer state for '" + name + "'");
        auto& slot = store.params[i].group == "disc" ? disc_opt_.slots()[i] : opt_.slots()[i];
        slot.m = *m;
        slot.v = *v;
        bool found = false;
        for (const auto& [n, s] : ckpt.opt_steps)
            if (n == name) {
                slot.steps = static_cast<std::int64_t>(s);
                found = true;
            }
        require(found, "checkpoint missing optimizer step count for '" + name + "'");
    }
    rng_.set_state(ckpt.rng_state);
    iter_ = static_cast<std::int64_t>(ckpt.iteration);
    has_best_ = ckpt.has_best;
    best_score_ = ckpt.best_score;
    best_iteration_ = static_cast<std::int64_t>(ckpt.best_iteration);
    if (has_best_) {
        best_params_.clear();
        for (const auto& p : store.params) {
            const Tensor* t = ckpt.find("best." + p.name);
            require(t != nullptr, "checkpoint missing best snapshot for '" + p.name + "'");
            best_params_.push_back(*t);
        }
    }
    // metric log continues from where the checkpoint left off
    log_.clear();
    std::istringstream in(ckpt.metric_log);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first || trim(line).empty()) {
            first = false;
            continue;
        }
        const auto f = split(line, ',');
        require(f.size() == 9, "checkpoint metric log is malformed");
        MetricRow row;
        std::int64_t it = 0;
        parse_i64(f[0], it);
        row.iteration = it;
        parse_f64(f[1], row.losses.l_rc);
        parse_f64(f[2], row.losses.l_rd);
        parse_f64(f[3], row.losses.l_d);
        parse_f64(f[4], row.losses.l_s);
        parse_f64(f[5], row.losses.index_mi);
        parse_f64(f[6], row.losses.tc);
        parse_f64(f[7], row.losses.dkl);
        parse_f64(f[8], row.losses.total);
        log_.push_back(row);
    }
}

double Trainer::current_warm() const {
    return warmup(iter_, cfg_.resolved_warmup_start(), cfg_.resolved_warmup_end());
}

LossBreakdown Trainer::compute_losses(const Tensor& x, const std::vector<int>& labels,
                                      const Tensor& noise, double warm, bool accumulate_grads) {
    auto& store = model_->store();
    const LatentLayout& layout = model_->layout();
    const bool cs = layout.is_class_specific();
    const int n = x.dim(0);
    const int D = layout.total_dim;

    EncodeTape enc_tape;
    const PosteriorBatch post = model_->encode(x, &enc_tape);
    const Tensor z = reparameterize(post, noise);
    const Tensor z_dec = cs ? gate_batch(z, labels, layout) : z;

    DecodeTape dec_tape;
    const Tensor x_prime = model_->decode(z_dec, accumulate_grads ? &dec_tape : nullptr);

    Tensor d_xp_rc;
    const double l_rc = recon_loss(x, x_prime, accumulate_grads ? &d_xp_rc : nullptr);

    Tensor d_xp_rd;
    const bool want_rd_grad = accumulate_grads && warm * cfg_.alpha > 0;
    const double l_rd = perceptual_loss(x, x_prime, extractor_, want_rd_grad ? &d_xp_rd : nullptr);

    // heads read the posterior means: the feature vector a sample is most
    // likely to carry, matching what the final classifier consumes
    std::vector<int> ncfv_idx;
    for (int i = layout.ncfv.begin; i < layout.ncfv.end; ++i) ncfv_idx.push_back(i);
    const std::vector<int> cls_idx = layout.classifiable_indices();
    const Tensor mu_ncfv = model_->gather_latent(post.mu, ncfv_idx);
    const Tensor mu_cls = model_->gather_latent(post.mu, cls_idx);

    std::vector<Tensor> disc_tape, sup_tape;
    const Tensor disc_logits =
        model_->discriminator().forward(store, mu_ncfv, accumulate_grads ? &disc_tape : nullptr);
    Tensor d_disc_logits;
    const double l_d = adversarial_encoder_loss(disc_logits, accumulate_grads ? &d_disc_logits : nullptr);

    const bool use_sup = !layout.is_class_specific() || cfg_.cs_supportive;
    Tensor d_sup_logits;
    double l_s = 0.0;
    if (use_sup) {
        const Tensor sup_logits =
            model_->supportive().forward(store, mu_cls, accumulate_grads ? &sup_tape : nullptr);
        l_s = supportive_loss(sup_logits, labels, accumulate_grads ? &d_sup_logits : nullptr);
    }

    Tensor dmu({n, D}), dlogvar({n, D}), dz({n, D});
    KlTerms kl;
    if (accumulate_grads)
        kl = kl_terms_backward(post, z, cfg_.dataset_size, 0.0, warm * cfg_.beta, warm * cfg_.gamma,
                               dmu, dlogvar, dz);
    else
        kl = kl_terms(post, z, cfg_.dataset_size);

    const LossBreakdown breakdown =
        total_loss(l_rc, l_rd, l_d, l_s, kl.index_mi, kl.tc, kl.dkl, cfg_, warm);

    if (!accumulate_grads) return breakdown;

    // one combined decoder backward: d total / d x'
    Tensor d_xp = d_xp_rc;
    if (want_rd_grad)
        for (std::int64_t i = 0; i < d_xp.size(); ++i)
            d_xp[i] += static_cast<real>(warm * cfg_.alpha) * d_xp_rd[i];
    Tensor dz_dec = model_->decode_backward(dec_tape, d_xp);
    if (cs) dz_dec = gate_batch_backward(dz_dec, labels, layout);
    for (std::int64_t i = 0; i < dz.size(); ++i) dz[i] += dz_dec[i];

    // adversarial feedback to the encoder through mu; discriminator
    // parameters are stepped separately, their grads here are discarded by
    // group filtering
    if (cfg_.epsilon_d > 0) {
        Tensor d_ncfv = model_->discriminator().backward(store, disc_tape, d_disc_logits);
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < ncfv_idx.size(); ++k)
                dmu[static_cast<std::int64_t>(i) * D + ncfv_idx[k]] +=
                    static_cast<real>(cfg_.epsilon_d) *
                    d_ncfv[static_cast<std::int64_t>(i) * static_cast<int>(ncfv_idx.size()) +
                           static_cast<int>(k)];
    }

    // supportive head trains on its own cross-entropy; the encoder receives
    // the epsilon_s-weighted share
    if (use_sup) {
        Tensor d_cls = model_->supportive().backward(store, sup_tape, d_sup_logits);
        if (cfg_.epsilon_s > 0) {
            for (int i = 0; i < n; ++i)
                for (std::size_t k = 0; k < cls_idx.size(); ++k)
                    dmu[static_cast<std::int64_t>(i) * D + cls_idx[k]] +=
                        static_cast<real>(cfg_.epsilon_s) *
                        d_cls[static_cast<std::int64_t>(i) * static_cast<int>(cls_idx.size()) +
                              static_cast<int>(k)];
        }
    }

    // reparameterization: z = mu + exp(lv/2) * eps
    for (std::int64_t i = 0; i < dz.size(); ++i) {
        dmu[i] += dz[i];
        dlogvar[i] += dz[i] * noise[i] * std::exp(post.log_var[i] / real(2)) / real(2);
    }
    model_->encode_backward(enc_tape, dmu, dlogvar);
    return breakdown;
}

std::uint64_t Trainer::graph_mask_signature(const Tensor& x, const std::vector<int>& labels,
                                            const Tensor& noise) {
    auto& store = model_->store();
    const LatentLayout& layout = model_->layout();
    EncodeTape tape;
    const PosteriorBatch post = model_->encode(x, &tape);
    const Tensor z = reparameterize(post, noise);
    const Tensor z_dec = layout.is_class_specific() ? gate_batch(z, labels, layout) : z;

    std::vector<int> ncfv_idx;
    for (int i = layout.ncfv.begin; i < layout.ncfv.end; ++i) ncfv_idx.push_back(i);

    const Tensor x_prime = model_->decode(z_dec);

    std::uint64_t h = model_->mask_signature(x);
    h = h * 1099511628211ULL ^ model_->decoder_net().mask_signature(store, z_dec);
    h = h * 1099511628211ULL ^
        model_->discriminator().mask_signature(store, model_->gather_latent(post.mu, ncfv_idx));
    h = h * 1099511628211ULL ^
        model_->supportive().mask_signature(store,
                                            model_->gather_latent(post.mu, layout.classifiable_indices()));
    h = h * 1099511628211ULL ^ extractor_.net.mask_signature(extractor_.store, x_prime);
    return h;
}

LossBreakdown Trainer::step() {
    auto& store = model_->store();
    const int n = cfg_.batch_size;
    const int D = model_->layout().total_dim;

    std::vector<int> idx(static_cast<std::size_t>(n));
    for (auto& i : idx)
        i = ds_.train_idx[static_cast<std::size_t>(rng_.below(ds_.train_idx.size()))];
    const Tensor x = images_to_batch(ds_, idx);
    const std::vector<int> labels = labels_of(ds_, idx);
    Tensor noise({n, D});
    for (auto& v : noise.data) v = static_cast<real>(rng_.normal());

    if (!in_pretrain()) {
        // (i) discriminator update, encoder frozen
        for (int du = 0; du < cfg_.discriminator_updates; ++du) {
            store.zero_grads();
            const PosteriorBatch post = model_->encode(x);
            std::vector<int> ncfv_idx;
            for (int i = model_->layout().ncfv.begin; i < model_->layout().ncfv.end; ++i)
                ncfv_idx.push_back(i);
            std::vector<Tensor> tape;
            const Tensor logits =
                model_->discriminator().forward(store, model_->gather_latent(post.mu, ncfv_idx), &tape);
            Tensor dlogits;
            discriminator_loss(logits, labels, &dlogits);
            model_->discriminator().backward(store, tape, dlogits);
            disc_opt_.step(store, {"disc"});
        }
    }

    // (ii) encoder/decoder/supportive update on the full objective
    store.zero_grads();
    LossBreakdown losses;
    if (in_pretrain()) {
        EncodeTape enc_tape;
        const PosteriorBatch post = model_->encode(x, &enc_tape);
        const Tensor z = reparameterize(post, noise);
        const Tensor z_dec = model_->layout().is_class_specific()
                                 ? gate_batch(z, labels, model_->layout())
                                 : z;
        DecodeTape dec_tape;
        const Tensor x_prime = model_->decode(z_dec, &dec_tape);
        Tensor d_xp;
        losses.l_rc = recon_loss(x, x_prime, &d_xp);
        losses.total = losses.l_rc;
        Tensor dz = model_->decode_backward(dec_tape, d_xp);
        if (model_->layout().is_class_specific())
            dz = gate_batch_backward(dz, labels, model_->layout());
        Tensor dmu({n, D}), dlogvar({n, D});
        for (std::int64_t i = 0; i < dz.size(); ++i) {
            dmu[i] = dz[i];
            dlogvar[i] = dz[i] * noise[i] * std::exp(post.log_var[i] / real(2)) / real(2);
        }
        model_->encode_backward(enc_tape, dmu, dlogvar);
        opt_.step(store, {"vae"});
    } else {
        losses = compute_losses(x, labels, noise, current_warm(), true);
        opt_.step(store, {"vae", "sup"});
    }

    ++iter_;
    return losses;
}

LossBreakdown Trainer::validation_losses() {
    const std::vector<int>& idx = ds_.val_idx.empty() ? ds_.train_idx : ds_.val_idx;
    const Tensor x = images_to_batch(ds_, idx);
    const std::vector<int> labels = labels_of(ds_, idx);
    Rng eval_rng(derive_seed(cfg_.seed, 0xE7A1u ^ static_cast<std::uint64_t>(iter_)));
    Tensor noise({static_cast<int>(idx.size()), model_->layout().total_dim});
    for (auto& v : noise.data) v = static_cast<real>(eval_rng.normal());

    // exact aggregate weights over the split: M equals the batch here
    const std::int64_t saved_m = cfg_.dataset_size;
    cfg_.dataset_size = static_cast<std::int64_t>(idx.size());
    LossBreakdown out = compute_losses(x, labels, noise, current_warm(), false);
    cfg_.dataset_size = saved_m;
    return out;
}

void Trainer::snapshot_best(double score) {
    best_params_.clear();
    for (const auto& p : model_->store().params) best_params_.push_back(p.value);
    best_score_ = score;
    best_iteration_ = iter_;
    has_best_ = true;
}

TrainResult Trainer::run(const std::string& run_dir, std::int64_t until) {
    const std::int64_t stop = until < 0 ? cfg_.iterations : std::min(until, cfg_.iterations);
    TrainResult result;
    {
        const LossBreakdown v = validation_losses();
        result.initial_val_lrc = v.l_rc;
        if (!has_best_) snapshot_best(v.l_rc + v.tc + v.dkl);
    }

    while (iter_ < stop) {
        LossBreakdown losses;
        try {
            losses = step();
        } catch (const std::runtime_error&) {
            diverged_ = true;
        }
        if (!diverged_ && !std::isfinite(losses.total)) diverged_ = true;
        if (diverged_) {
            // roll back to the last good snapshot and stop
            if (has_best_) {
                auto& store = model_->store();
                for (std::size_t i = 0; i < store.params.size(); ++i)
                    store.params[i].value = best_params_[i];
            }
            break;
        }

        if (iter_ % cfg_.log_interval == 0 || iter_ == cfg_.iterations) {
            log_.push_back({iter_, losses});
            const LossBreakdown v = validation_losses();
            const double score = v.l_rc + v.tc + v.dkl;
            if (!has_best_ || score < best_score_) snapshot_best(score);
            result.final_val_lrc = v.l_rc;
        }
        if (!run_dir.empty() && cfg_.checkpoint_interval > 0 && iter_ % cfg_.checkpoint_interval == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%08lld.bin", static_cast<long long>(iter_));
            save_checkpoint(make_checkpoint(), (fs::path(run_dir) / name).string());
        }
    }

    result.checkpoint = make_checkpoint();
    result.log = log_;
    result.diverged = diverged_;
    result.best_score = best_score_;
    result.best_iteration = best_iteration_;
    return result;
}

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint c;
    c.iteration = static_cast<std::uint64_t>(iter_);
    c.rng_state = rng_.state();
    const auto& store = model_->store();
    for (const auto& p : store.params) c.tensors.emplace_back("param." + p.name, p.value);
    for (std::size_t i = 0; i < store.params.size(); ++i) {
        const bool is_disc = store.params[i].group == "disc";
        const auto& slot = is_disc ? disc_opt_.slots()[i] : opt_.slots()[i];
        c.tensors.emplace_back("opt.m." + store.params[i].name, slot.m);
        c.tensors.emplace_back("opt.v." + store.params[i].name, slot.v);
        c.opt_steps.emplace_back(store.params[i].name, static_cast<std::uint64_t>(slot.steps));
    }
    if (has_best_)
        for (std::size_t i = 0; i < store.params.size(); ++i)
            c.tensors.emplace_back("best." + store.params[i].name, best_params_[i]);
    c.config_text = cfg_.to_text();
    c.metric_log = metric_csv(log_);
    c.best_score = best_score_;
    c.best_iteration = static_cast<std::uint64_t>(best_iteration_);
    c.has_best = has_best_;
    c.diverged = diverged_;
    return c;
}

VaeModel load_model(const Checkpoint& ckpt) {
    const TrainingConfig cfg = TrainingConfig::from_text(ckpt.config_text);
    VaeModel model(cfg);
    const bool use_best = cfg.selection == SnapshotSelection::best_loss && ckpt.has_best;
    for (auto& p : model.store().params) {
        const Tensor* t = ckpt.find((use_best ? "best." : "param.") + p.name);
        require(t != nullptr, "checkpoint missing tensor for '" + p.name + "'");
        require(t->shape == p.value.shape, "checkpoint shape mismatch for '" + p.name + "'");
        p.value = *t;
    }
    return model;
}

}  // namespace eclf
