#include "eclf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eclf/trainer.hpp"

namespace eclf {

namespace {

FeatureSet features_for_indices(const VaeModel& model, const Dataset& ds, const std::vector<int>& idx,
                                const std::vector<int>& latent_idx) {
    require(!idx.empty(), "extract_features: empty split");
    const Tensor x = images_to_batch(ds, idx);
    const PosteriorBatch post = model.encode(x);
    const int f = static_cast<int>(latent_idx.size());
    FeatureSet set;
    set.features = Tensor({static_cast<int>(idx.size()), f});
    for (int i = 0; i < static_cast<int>(idx.size()); ++i)
        for (int k = 0; k < f; ++k)
            set.features[static_cast<std::int64_t>(i) * f + k] =
                post.mu[static_cast<std::int64_t>(i) * model.layout().total_dim + latent_idx[k]];
    set.labels = labels_of(ds, idx);
    return set;
}

}  // namespace

FeatureSet extract_features(const VaeModel& model, const Dataset& ds, SplitKind split) {
    return features_for_indices(model, ds, ds.split(split), model.layout().classifiable_indices());
}

FeatureSet extract_ncfv_features(const VaeModel& model, const Dataset& ds, SplitKind split) {
    std::vector<int> idx;
    for (int i = model.layout().ncfv.begin; i < model.layout().ncfv.end; ++i) idx.push_back(i);
    return features_for_indices(model, ds, ds.split(split), idx);
}

ClassifierModel::ClassifierModel(int input_dim, int classes, std::uint64_t seed)
    : input_dim_(input_dim), classes_(classes) {
    net_ = build_head(store_, "cls", HeadSpec::with_defaults(input_dim, classes),
                      derive_seed(seed, 0xC1A5), "cls");
}

ClassifierModel::Prediction ClassifierModel::predict(const std::vector<real>& feature) const {
    require(static_cast<int>(feature.size()) == input_dim_,
            "predict: feature length " + std::to_string(feature.size()) + " does not match layout " +
                std::to_string(input_dim_));
    Tensor x({1, input_dim_}, std::vector<real>(feature));
    const Tensor l = logits(x);
    const Tensor p = softmax<real>(l);
    Prediction out;
    out.logits.assign(l.data.begin(), l.data.end());
    out.probs.assign(p.data.begin(), p.data.end());
    out.cls = 0;
    for (int c = 1; c < classes_; ++c)
        if (out.logits[static_cast<std::size_t>(c)] > out.logits[static_cast<std::size_t>(out.cls)])
            out.cls = c;
    return out;
}

Tensor ClassifierModel::logits(const Tensor& features) const { return net_.forward(store_, features); }

std::vector<int> ClassifierModel::classify(const Tensor& features) const {
    const Tensor l = logits(features);
    std::vector<int> out(static_cast<std::size_t>(l.dim(0)));
    for (int i = 0; i < l.dim(0); ++i) {
        int best = 0;
        for (int c = 1; c < classes_; ++c)
            if (l[static_cast<std::int64_t>(i) * classes_ + c] >
                l[static_cast<std::int64_t>(i) * classes_ + best])
                best = c;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

namespace {

double eval_accuracy(const ClassifierModel& model, const FeatureSet& set) {
    const std::vector<int> pred = model.classify(set.features);
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hits += pred[i] == set.labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

ClassifierModel train_final(const FeatureSet& train, const FeatureSet& val,
                            const ClassifierConfig& cfg) {
    require(train.n() >= 2, "train_final: need at least 2 training samples");
    const int classes = 1 + *std::max_element(train.labels.begin(), train.labels.end());
    {
        const int lo = *std::min_element(train.labels.begin(), train.labels.end());
        require(classes >= 2 && lo == 0, "train_final: labels must cover classes starting at 0");
        std::vector<int> counts(static_cast<std::size_t>(classes), 0);
        for (int l : train.labels) counts[static_cast<std::size_t>(l)]++;
        for (int c = 0; c < classes; ++c)
            require(counts[static_cast<std::size_t>(c)] > 0,
                    "train_final: class " + std::to_string(c) + " has no training samples");
    }

    ClassifierModel model(train.dim(), classes, cfg.seed);
    OptimizerConfig oc;
    oc.learning_rate = cfg.learning_rate;
    Optimizer<real> opt(oc, model.store());
    Rng rng(derive_seed(cfg.seed, 0xF17A));

    std::vector<Tensor> best_params;
    double best_acc = -1.0;
    std::int64_t best_iter = 0;
    auto maybe_snapshot = [&](std::int64_t iter) {
        const double acc = eval_accuracy(model, val);
        if (acc > best_acc) {
            best_acc = acc;
            best_iter = iter;
            best_params.clear();
            for (const auto& p : model.store().params) best_params.push_back(p.value);
        }
    };

    const int bs = std::min<int>(cfg.batch_size, train.n());
    for (std::int64_t iter = 1; iter <= cfg.iterations; ++iter) {
        Tensor x({bs, train.dim()});
        std::vector<int> labels(static_cast<std::size_t>(bs));
        for (int b = 0; b < bs; ++b) {
            const auto i = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(train.n())));
            for (int k = 0; k < train.dim(); ++k)
                x[static_cast<std::int64_t>(b) * train.dim() + k] =
                    train.features[i * train.dim() + k];
            labels[static_cast<std::size_t>(b)] = train.labels[static_cast<std::size_t>(i)];
        }
        model.store().zero_grads();
        std::vector<Tensor> tape;
        const Tensor logits = model.net().forward(model.store(), x, &tape);
        Tensor dlogits;
        softmax_cross_entropy<real>(logits, labels, &dlogits);
        model.net().backward(model.store(), tape, dlogits);
        opt.step(model.store());
        if (iter % cfg.eval_interval == 0 || iter == cfg.iterations) maybe_snapshot(iter);
    }

    for (std::size_t i = 0; i < model.store().params.size(); ++i)
        model.store().params[i].value = best_params[i];
    model.best_iteration = best_iter;
    model.best_val_accuracy = best_acc;
    return model;
}

double accuracy(const ClassifierModel& model, const FeatureSet& set) {
    return eval_accuracy(model, set);
}

Checkpoint classifier_checkpoint(const ClassifierModel& model) {
    Checkpoint c;
    for (const auto& p : model.store().params) c.tensors.emplace_back("param." + p.name, p.value);
    std::ostringstream cfg;
    cfg << "kind = classifier\n";
    cfg << "input_dim = " << model.input_dim() << "\n";
    cfg << "classes = " << model.classes() << "\n";
    cfg << "best_iteration = " << model.best_iteration << "\n";
    cfg << "best_val_accuracy = " << fmt_real(model.best_val_accuracy) << "\n";
    c.config_text = cfg.str();
    return c;
}

ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt) {
    int input_dim = 0, classes = 0;
    std::int64_t best_iter = 0;
    double best_acc = 0.0;
    for (const auto& raw : split(ckpt.config_text, '\n')) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "classifier checkpoint: bad config line");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::int64_t i = 0;
        double d = 0.0;
        if (key == "input_dim" && parse_i64(value, i)) input_dim = static_cast<int>(i);
        else if (key == "classes" && parse_i64(value, i)) classes = static_cast<int>(i);
        else if (key == "best_iteration" && parse_i64(value, i)) best_iter = i;
        else if (key == "best_val_accuracy" && parse_f64(value, d)) best_acc = d;
        else if (key == "kind") require(value == "classifier", "not a classifier checkpoint");
        else throw std::runtime_error("classifier checkpoint: unknown key '" + key + "'");
    }
    require(input_dim > 0 && classes >= 2, "classifier checkpoint: missing dimensions");
    ClassifierModel model(input_dim, classes, 0);
    for (auto& p : model.store().params) {
        const Tensor* t = ckpt.find("param." + p.name);
        require(t != nullptr, "classifier checkpoint missing tensor '" + p.name + "'");
        require(t->shape == p.value.shape, "classifier checkpoint shape mismatch for '" + p.name + "'");
        p.value = *t;
    }
    model.best_iteration = best_iter;
    model.best_val_accuracy = best_acc;
    return model;
}

BaselineResult train_baseline(const Dataset& ds, const BaselineConfig& cfg) {
    require(!ds.train_idx.empty() && !ds.val_idx.empty() && !ds.test_idx.empty(),
            "train_baseline: dataset needs all three splits");
    const int classes = ds.num_classes();
    const int s = ds.image_size;
    require(s % 4 == 0, "train_baseline: image size must be divisible by 4");

    ParamStore<real> store;
    Net<real> net;
    const std::uint64_t seed = derive_seed(cfg.seed, 0xBA5E);
    net.layers.push_back(make_layer<real>(store, LayerSpec::conv("base.c1", 3, 8, 4, 2, 1), seed, "b"));
    net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    net.layers.push_back(make_layer<real>(store, LayerSpec::conv("base.c2", 8, 16, 4, 2, 1), seed, "b"));
    net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    net.layers.push_back(Layer<real>{LayerSpec::flatten(), -1, -1});
    const int flat = 16 * (s / 4) * (s / 4);
    net.layers.push_back(make_layer<real>(store, LayerSpec::dense("base.fc1", flat, 64), seed, "b"));
    net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    net.layers.push_back(make_layer<real>(store, LayerSpec::dense("base.fc2", 64, classes), seed, "b"));

    OptimizerConfig oc;
    oc.learning_rate = cfg.learning_rate;
    Optimizer<real> opt(oc, store);
    Rng rng(derive_seed(cfg.seed, 0xBB01));

    auto split_accuracy = [&](const std::vector<int>& idx) {
        const Tensor x = images_to_batch(ds, idx);
        const std::vector<int> labels = labels_of(ds, idx);
        const Tensor logits = net.forward(store, x);
        int hits = 0;
        for (int i = 0; i < logits.dim(0); ++i) {
            int best = 0;
            for (int c = 1; c < classes; ++c)
                if (logits[static_cast<std::int64_t>(i) * classes + c] >
                    logits[static_cast<std::int64_t>(i) * classes + best])
                    best = c;
            hits += best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        return static_cast<double>(hits) / static_cast<double>(idx.size());
    };

    std::vector<Tensor> best_params;
    double best_val = -1.0;
    for (std::int64_t iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<int> idx(static_cast<std::size_t>(cfg.batch_size));
        for (auto& i : idx)
            i = ds.train_idx[static_cast<std::size_t>(rng.below(ds.train_idx.size()))];
        const Tensor x = images_to_batch(ds, idx);
        const std::vector<int> labels = labels_of(ds, idx);
        store.zero_grads();
        std::vector<Tensor> tape;
        const Tensor logits = net.forward(store, x, &tape);
        Tensor dlogits;
        softmax_cross_entropy<real>(logits, labels, &dlogits);
        net.backward(store, tape, dlogits);
        opt.step(store);
        if (iter % cfg.eval_interval == 0 || iter == cfg.iterations) {
            const double acc = split_accuracy(ds.val_idx);
            if (acc > best_val) {
                best_val = acc;
                best_params.clear();
                for (const auto& p : store.params) best_params.push_back(p.value);
            }
        }
    }
    for (std::size_t i = 0; i < store.params.size(); ++i) store.params[i].value = best_params[i];

    BaselineResult r;
    r.val_accuracy = best_val;
    r.test_accuracy = split_accuracy(ds.test_idx);
    return r;
}

}  // namespace eclf
