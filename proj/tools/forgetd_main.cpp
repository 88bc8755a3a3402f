#include "forgetd/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

forgetd::RunConfig load_with_overrides(const std::string& config_path,
                                       const std::optional<std::uint64_t>& seed,
                                       const std::optional<std::string>& out) {
    forgetd::RunConfig cfg = forgetd::load_config(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.train.seed = cfg.train_seed();
        cfg.unlearn.seed = cfg.unlearn_seed();
        cfg.raw["seed"] = std::to_string(*seed);
    }
    if (out) {
        cfg.out_dir = *out;
        cfg.raw["out"] = *out;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forgetd: train small classifiers with an update ledger, then erase targeted "
                 "data and measure what the model still knows"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, ledger_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out", out, "override the output directory");
    };

    CLI::App* train = app.add_subcommand("train", "train and record the update ledger");
    add_common(train);

    CLI::App* unlearn = app.add_subcommand("unlearn", "erase the targeted data from a checkpoint");
    add_common(unlearn);
    unlearn->add_option("--checkpoint", checkpoint_path, "trained model checkpoint")->required();
    unlearn->add_option("--ledger", ledger_path, "update ledger recorded during training")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "report targeted/retained accuracy");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "retained accuracy vs affected-batch fraction");
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const forgetd::RunConfig cfg = load_with_overrides(config_path, seed, out);
        if (train->parsed()) return forgetd::cmd_train(cfg);
        if (unlearn->parsed()) return forgetd::cmd_unlearn(cfg, checkpoint_path, ledger_path);
        if (eval->parsed()) return forgetd::cmd_eval(cfg, checkpoint_path);
        if (sweep->parsed()) return forgetd::cmd_sweep(cfg);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const forgetd::IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return 3;
    } catch (const forgetd::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const forgetd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const forgetd::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
