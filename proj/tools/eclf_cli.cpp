#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "eclf/config.hpp"
#include "eclf/pipeline.hpp"

namespace {

// --section.key value pairs left over after the named options
void apply_extra_overrides(eclf::RunConfig& cfg, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0)
            throw std::runtime_error("unexpected argument '" + tok + "' (expected --section.key value)");
        std::string key = tok.substr(2);
        std::string value;
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size())
                throw std::runtime_error("missing value for override '" + tok + "'");
            value = extras[++i];
        }
        eclf::apply_override(cfg, key, value);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECLF: explainable classification with a split-latent disentangled VAE"};

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_seed = false;
    bool show_keys = false;

    app.add_option("--config", config_path, "configuration file (section.key = value lines)");
    app.add_option("--out", out_dir, "output root directory");
    app.add_option("--seed", seed, "master seed")->each([&](const std::string&) { have_seed = true; });
    app.add_flag("--list-keys", show_keys, "print every config key with its default and exit");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "generate a synthetic factor-controlled dataset"},
        {"ingest", "ingest a folder of PNGs with one subdirectory per class"},
        {"train-vae", "train the split-latent VAE (plain or class-specific)"},
        {"train-cls", "train the final classifier on frozen CFV means"},
        {"explain", "explain one classification with traversal strips and masks"},
        {"eval", "report accuracies (and the pixel baseline) as CSV"},
        {"sweep", "trend study over beta or the latent dimensionality"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->allow_extras();
    }

    CLI11_PARSE(app, argc, argv);

    if (show_keys) {
        std::cout << eclf::config_reference();
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << "error: expected a subcommand (see --help)\n";
        return 1;
    }

    try {
        eclf::RunConfig cfg;
        if (!config_path.empty()) cfg = eclf::parse_config_file(config_path);
        CLI::App* sub = app.get_subcommands().front();
        apply_extra_overrides(cfg, sub->remaining());
        if (have_seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_root = out_dir;

        const std::string run_dir = eclf::run_command(sub->get_name(), cfg);
        std::cout << "run directory: " << run_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
