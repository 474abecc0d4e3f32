#include "eclf/config.hpp"

#include <cstdlib>
#include <functional>
#include <sstream>

namespace eclf {

LatentLayout RunConfig::latent_layout() const {
    if (vae_class_specific)
        return LatentLayout::class_specific(vae_cfvs1_dim, vae_ncfv_dim, vae_cfvs2_dim);
    return LatentLayout::plain(vae_cfv_dim, vae_ncfv_dim);
}

TrainingConfig RunConfig::training_config() const {
    TrainingConfig t;
    t.cs_supportive = vae_cs_supportive;
    t.alpha = vae_alpha;
    t.epsilon_d = vae_epsilon_d;
    t.epsilon_s = vae_epsilon_s;
    t.beta = vae_beta;
    t.gamma = vae_gamma;
    t.layout = latent_layout();
    t.batch_size = vae_batch_size;
    t.iterations = vae_iterations;
    t.pretrain_iterations = vae_pretrain_iterations;
    t.warmup_start = vae_warmup_start;
    t.warmup_end = vae_warmup_end;
    t.learning_rate = vae_learning_rate;
    t.disc_learning_rate = vae_disc_learning_rate;
    t.seed = seed;
    t.tying = vae_tying == "tied" ? WeightTying::tied : WeightTying::mirrored;
    t.arch = vae_arch == "paper" ? ArchPreset::paper : ArchPreset::desk;
    t.image_size = data.image_size;
    t.log_interval = vae_log_interval;
    t.checkpoint_interval = vae_checkpoint_interval;
    t.selection = vae_selection == "final" ? SnapshotSelection::final_iteration
                                           : SnapshotSelection::best_loss;
    t.discriminator_updates = vae_discriminator_updates;
    return t;
}

ClassifierConfig RunConfig::classifier_config() const {
    ClassifierConfig c;
    c.iterations = cls_iterations;
    c.batch_size = cls_batch_size;
    c.learning_rate = cls_learning_rate;
    c.eval_interval = cls_eval_interval;
    c.seed = seed;
    return c;
}

BaselineConfig RunConfig::baseline_config() const {
    BaselineConfig b;
    b.iterations = baseline_iterations;
    b.seed = seed;
    return b;
}

ExplanationQuery RunConfig::explanation_query() const {
    ExplanationQuery q;
    q.class_a = explain_class_a;
    q.class_b = explain_class_b;
    q.k_neighbors = explain_k_neighbors;
    q.pair_budget = explain_pair_budget;
    q.k_grid = explain_k_grid;
    q.top_n = explain_top_n;
    q.coarse_steps = explain_coarse_steps;
    q.tau_rel = explain_tau_rel;
    q.retry_factor = explain_retry_factor;
    q.seed = seed;
    return q;
}

std::string RunConfig::resolved_out_root() const {
    if (!out_root.empty()) return out_root;
    const char* env = std::getenv("ECLF_OUT_ROOT");
    return env && *env ? env : "runs";
}

namespace {

struct KeyDef {
    std::string key;
    std::string doc;
    std::function<std::string(const RunConfig&)> get;
    std::function<bool(RunConfig&, const std::string&)> set;
};

template <typename T>
std::string list_to_str(const std::vector<T>& v) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) ss << ",";
        if constexpr (std::is_floating_point_v<T>)
            ss << fmt_real(v[i]);
        else
            ss << v[i];
    }
    return ss.str();
}

bool parse_f64_list(const std::string& s, std::vector<double>& out) {
    std::vector<double> vals;
    for (const auto& part : split(s, ',')) {
        double d = 0;
        if (!parse_f64(part, d)) return false;
        vals.push_back(d);
    }
    if (vals.empty()) return false;
    out = std::move(vals);
    return true;
}

bool parse_u64_list(const std::string& s, std::vector<std::uint64_t>& out) {
    std::vector<std::uint64_t> vals;
    for (const auto& part : split(s, ',')) {
        std::uint64_t u = 0;
        if (!parse_u64(part, u)) return false;
        vals.push_back(u);
    }
    if (vals.empty()) return false;
    out = std::move(vals);
    return true;
}

bool parse_bool(const std::string& s, bool& out) {
    const std::string t = lower(trim(s));
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
        out = true;
        return true;
    }
    if (t == "false" || t == "0" || t == "no" || t == "off") {
        out = false;
        return true;
    }
    return false;
}

#define GET(expr) [](const RunConfig& c) -> std::string { return expr; }

KeyDef f64_key(std::string key, std::string doc, double RunConfig::*field) {
    return {std::move(key), std::move(doc),
            [field](const RunConfig& c) { return fmt_real(c.*field); },
            [field](RunConfig& c, const std::string& v) { return parse_f64(v, c.*field); }};
}

KeyDef i64_key(std::string key, std::string doc, std::int64_t RunConfig::*field) {
    return {std::move(key), std::move(doc),
            [field](const RunConfig& c) { return std::to_string(c.*field); },
            [field](RunConfig& c, const std::string& v) { return parse_i64(v, c.*field); }};
}

KeyDef int_key(std::string key, std::string doc, int RunConfig::*field) {
    return {std::move(key), std::move(doc),
            [field](const RunConfig& c) { return std::to_string(c.*field); },
            [field](RunConfig& c, const std::string& v) {
                std::int64_t i = 0;
                if (!parse_i64(v, i)) return false;
                c.*field = static_cast<int>(i);
                return true;
            }};
}

KeyDef str_key(std::string key, std::string doc, std::string RunConfig::*field) {
    return {std::move(key), std::move(doc), [field](const RunConfig& c) { return c.*field; },
            [field](RunConfig& c, const std::string& v) {
                c.*field = v;
                return true;
            }};
}

KeyDef bool_key(std::string key, std::string doc, bool RunConfig::*field) {
    return {std::move(key), std::move(doc),
            [field](const RunConfig& c) { return c.*field ? "true" : "false"; },
            [field](RunConfig& c, const std::string& v) { return parse_bool(v, c.*field); }};
}

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> r;
        r.push_back({"seed", "master seed for every stage",
                     GET(std::to_string(c.seed)),
                     [](RunConfig& c, const std::string& v) { return parse_u64(v, c.seed); }});
        r.push_back(str_key("out", "output root directory (default $ECLF_OUT_ROOT or ./runs)",
                            &RunConfig::out_root));

        r.push_back({"data.preset", "synth2 | synth3 | synth4 | folder",
                     GET(std::string(preset_name(c.data.preset))),
                     [](RunConfig& c, const std::string& v) {
                         try {
                             c.data.preset = parse_preset(v);
                             return true;
                         } catch (...) {
                             return false;
                         }
                     }});
        r.push_back(str_key("data.path", "dataset directory consumed by training stages",
                            &RunConfig::data_path));
        r.push_back({"data.image_size", "square image edge in pixels (>= 16)",
                     GET(std::to_string(c.data.image_size)),
                     [](RunConfig& c, const std::string& v) {
                         std::int64_t i = 0;
                         if (!parse_i64(v, i)) return false;
                         c.data.image_size = static_cast<int>(i);
                         return true;
                     }});
        r.push_back({"data.train_per_class", "generated training samples per class",
                     GET(std::to_string(c.data.train_per_class)),
                     [](RunConfig& c, const std::string& v) {
                         std::int64_t i = 0;
                         if (!parse_i64(v, i)) return false;
                         c.data.train_per_class = static_cast<int>(i);
                         return true;
                     }});
        r.push_back({"data.val_per_class", "validation samples per class",
                     GET(std::to_string(c.data.val_per_class)),
                     [](RunConfig& c, const std::string& v) {
                         std::int64_t i = 0;
                         if (!parse_i64(v, i)) return false;
                         c.data.val_per_class = static_cast<int>(i);
                         return true;
                     }});
        r.push_back({"data.test_per_class", "test samples per class",
                     GET(std::to_string(c.data.test_per_class)),
                     [](RunConfig& c, const std::string& v) {
                         std::int64_t i = 0;
                         if (!parse_i64(v, i)) return false;
                         c.data.test_per_class = static_cast<int>(i);
                         return true;
                     }});
        r.push_back({"data.hue_threshold", "class hue threshold for the synthetic presets",
                     GET(fmt_real(c.data.hue_threshold)),
                     [](RunConfig& c, const std::string& v) { return parse_f64(v, c.data.hue_threshold); }});
        r.push_back({"data.hue_margin", "separation margin around the hue threshold",
                     GET(fmt_real(c.data.hue_margin)),
                     [](RunConfig& c, const std::string& v) { return parse_f64(v, c.data.hue_margin); }});
        r.push_back({"data.spot_threshold", "class spot-count threshold",
                     GET(std::to_string(c.data.spot_threshold)),
                     [](RunConfig& c, const std::string& v) {
                         std::int64_t i = 0;
                         if (!parse_i64(v, i)) return false;
                         c.data.spot_threshold = static_cast<int>(i);
                         return true;
                     }});
        r.push_back({"data.folder_root", "class-per-subdirectory image folder for ingest",
                     GET(c.data.folder_root),
                     [](RunConfig& c, const std::string& v) {
                         c.data.folder_root = v;
                         return true;
                     }});

        r.push_back(f64_key("vae.alpha", "perceptual-regularizer weight", &RunConfig::vae_alpha));
        r.push_back(f64_key("vae.epsilon_d", "adversarial loss weight", &RunConfig::vae_epsilon_d));
        r.push_back(f64_key("vae.epsilon_s", "supportive loss weight", &RunConfig::vae_epsilon_s));
        r.push_back(f64_key("vae.beta", "total-correlation weight", &RunConfig::vae_beta));
        r.push_back(f64_key("vae.gamma", "dimension-wise KL weight", &RunConfig::vae_gamma));
        r.push_back(bool_key("vae.class_specific", "train the class-specific (two-class) variant",
                             &RunConfig::vae_class_specific));
        r.push_back(int_key("vae.cfv_dim", "classifiable latent dims (plain mode)",
                            &RunConfig::vae_cfv_dim));
        r.push_back(int_key("vae.ncfv_dim", "non-classifiable latent dims", &RunConfig::vae_ncfv_dim));
        r.push_back(int_key("vae.cfvs1_dim", "class-1 latent dims (class-specific mode)",
                            &RunConfig::vae_cfvs1_dim));
        r.push_back(int_key("vae.cfvs2_dim", "class-2 latent dims (class-specific mode)",
                            &RunConfig::vae_cfvs2_dim));
        r.push_back(int_key("vae.batch_size", "minibatch size (>= 2)", &RunConfig::vae_batch_size));
        r.push_back(i64_key("vae.iterations", "training iterations", &RunConfig::vae_iterations));
        r.push_back(i64_key("vae.pretrain_iterations", "reconstruction-only lead-in iterations",
                            &RunConfig::vae_pretrain_iterations));
        r.push_back(i64_key("vae.warmup_start", "warmup ramp start (-1: 8% of budget)",
                            &RunConfig::vae_warmup_start));
        r.push_back(i64_key("vae.warmup_end", "warmup ramp end (-1: 9.33% of budget)",
                            &RunConfig::vae_warmup_end));
        r.push_back(f64_key("vae.learning_rate", "Adam learning rate", &RunConfig::vae_learning_rate));
        r.push_back(f64_key("vae.disc_learning_rate",
                            "discriminator learning rate (0: same as vae.learning_rate)",
                            &RunConfig::vae_disc_learning_rate));
        r.push_back({"vae.tying", "decoder kernels: mirrored | tied", GET(c.vae_tying),
                     [](RunConfig& c, const std::string& v) {
                         if (v != "mirrored" && v != "tied") return false;
                         c.vae_tying = v;
                         return true;
                     }});
        r.push_back({"vae.arch", "architecture preset: desk | paper", GET(c.vae_arch),
                     [](RunConfig& c, const std::string& v) {
                         if (v != "desk" && v != "paper") return false;
                         c.vae_arch = v;
                         return true;
                     }});
        r.push_back(i64_key("vae.log_interval", "iterations between metric rows",
                            &RunConfig::vae_log_interval));
        r.push_back(i64_key("vae.checkpoint_interval", "periodic checkpoint cadence (0: final only)",
                            &RunConfig::vae_checkpoint_interval));
        r.push_back({"vae.selection", "shipped snapshot: best | final", GET(c.vae_selection),
                     [](RunConfig& c, const std::string& v) {
                         if (v != "best" && v != "final") return false;
                         c.vae_selection = v;
                         return true;
                     }});
        r.push_back(int_key("vae.discriminator_updates", "discriminator steps per encoder step",
                            &RunConfig::vae_discriminator_updates));
        r.push_back(bool_key("vae.cs_supportive",
                             "keep the supportive head active in class-specific mode",
                             &RunConfig::vae_cs_supportive));
        r.push_back(str_key("vae.resume", "checkpoint to resume training from", &RunConfig::vae_resume));
        r.push_back(str_key("vae.checkpoint", "trained VAE checkpoint for later stages",
                            &RunConfig::vae_checkpoint));

        r.push_back(i64_key("classifier.iterations", "final-classifier iterations",
                            &RunConfig::cls_iterations));
        r.push_back(int_key("classifier.batch_size", "final-classifier batch size",
                            &RunConfig::cls_batch_size));
        r.push_back(f64_key("classifier.learning_rate", "final-classifier learning rate",
                            &RunConfig::cls_learning_rate));
        r.push_back(i64_key("classifier.eval_interval", "validation cadence during training",
                            &RunConfig::cls_eval_interval));
        r.push_back(bool_key("classifier.baseline", "also train the pixel baseline during eval",
                             &RunConfig::cls_baseline));
        r.push_back(i64_key("classifier.baseline_iterations", "pixel-baseline iterations",
                            &RunConfig::baseline_iterations));
        r.push_back(str_key("classifier.checkpoint", "trained classifier checkpoint for later stages",
                            &RunConfig::cls_checkpoint));

        r.push_back(int_key("explain.query_index", "dataset sample index to explain",
                            &RunConfig::explain_query_index));
        r.push_back(int_key("explain.class_a", "override class A (-1: predicted class)",
                            &RunConfig::explain_class_a));
        r.push_back(int_key("explain.class_b", "override contrast class (-1: second-highest logit)",
                            &RunConfig::explain_class_b));
        r.push_back(int_key("explain.k_neighbors", "K nearest contrast-class samples",
                            &RunConfig::explain_k_neighbors));
        r.push_back(int_key("explain.pair_budget", "boundary pairs to collect (two fit points each)",
                            &RunConfig::explain_pair_budget));
        r.push_back({"explain.k_grid", "interpolation constants, ascending, containing 0 and 1",
                     GET(list_to_str(c.explain_k_grid)),
                     [](RunConfig& c, const std::string& v) { return parse_f64_list(v, c.explain_k_grid); }});
        r.push_back(int_key("explain.top_n", "top features to traverse (-1: min(10, dims))",
                            &RunConfig::explain_top_n));
        r.push_back(int_key("explain.coarse_steps", "segment scan steps before bisection",
                            &RunConfig::explain_coarse_steps));
        r.push_back(f64_key("explain.tau_rel", "bisection tolerance relative to |A-B|",
                            &RunConfig::explain_tau_rel));
        r.push_back(int_key("explain.retry_factor", "attempt cap multiplier over the pair budget",
                            &RunConfig::explain_retry_factor));

        r.push_back({"sweep.axis", "beta | latent_dim", GET(c.sweep_axis),
                     [](RunConfig& c, const std::string& v) {
                         if (v != "beta" && v != "latent_dim") return false;
                         c.sweep_axis = v;
                         return true;
                     }});
        r.push_back({"sweep.values", "swept parameter values", GET(list_to_str(c.sweep_values)),
                     [](RunConfig& c, const std::string& v) { return parse_f64_list(v, c.sweep_values); }});
        r.push_back({"sweep.seeds", "seeds per swept value", GET(list_to_str(c.sweep_seeds)),
                     [](RunConfig& c, const std::string& v) { return parse_u64_list(v, c.sweep_seeds); }});
        return r;
    }();
    return defs;
}

#undef GET

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream ss;
    for (const auto& def : registry()) ss << def.key << " = " << def.get(cfg) << "\n";
    return ss.str();
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& def : registry()) {
        if (def.key != key) continue;
        if (!def.set(cfg, trim(value)))
            throw std::runtime_error("config: invalid value '" + value + "' for key '" + key + "'");
        return;
    }
    throw std::runtime_error("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    for (const auto& raw : split(text, '\n')) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config: line is not `key = value`: '" + line + "'");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) { return parse_config_text(read_text_file(path)); }

std::string config_reference() {
    std::ostringstream ss;
    RunConfig defaults;
    for (const auto& def : registry())
        ss << def.key << " = " << def.get(defaults) << "\n    " << def.doc << "\n";
    return ss.str();
}

}  // namespace eclf
