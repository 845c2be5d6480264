#include "stochdom/app.hpp"
#include "stochdom/error.hpp"
#include "stochdom/exec.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace stochdom;

    CLI::App app{"Monte Carlo finite element solver on randomly perturbed domains"};
    std::string mode, config_path, out_dir = "out";
    int threads = 0;
    app.add_option("mode", mode, "solve | estimate | lions | mc-cdf | adapt | reference")
        ->required()
        ->check(CLI::IsMember({"solve", "estimate", "lions", "mc-cdf", "adapt", "reference"}));
    app.add_option("--config", config_path, "JSON experiment configuration")->required();
    app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out_dir, "Output directory");
    CLI11_PARSE(app, argc, argv);

    try {
        set_max_threads(threads);
        ExperimentConfig config = parse_config(config_path);
        config.mode = parse_mode(mode);
        if (const char* env = std::getenv("STOCHDOM_SEED")) {
            char* end = nullptr;
            const unsigned long long seed = std::strtoull(env, &end, 10);
            if (*env == '\0' || *end != '\0' || *env == '-') {
                throw ConfigError("STOCHDOM_SEED", "expected a non-negative integer, got '" + std::string(env) + "'");
            }
            config.seed = seed;
        }
        const RunOutcome out = run_experiment(config, out_dir);
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
        for (const auto& f : out.files) std::cout << out_dir << '/' << f << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << error_json(e) << '\n';
        try {
            write_error(out_dir, e);
        } catch (const std::exception&) {
        }
        return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
    }
}
