// Command-line harness: train / eval / sweep over experiment config files.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uavei/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long episodes = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-c,--config", o.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", o.out_dir, "override outputDir");
    cmd->add_option("--seed", o.seed, "override seed");
    cmd->add_option("--episodes", o.episodes, "override training episode count");
}

uavei::ExperimentConfig load_with_overrides(const CommonOpts& o) {
    uavei::ExperimentConfig cfg = uavei::load_experiment_config(o.config_path);
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (o.episodes >= 0) {
        cfg.train.episodes = static_cast<int>(o.episodes);
        cfg.train.validate();
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV-assisted cooperative edge inference simulator and trainer"};
    app.require_subcommand(1);

    CommonOpts train_o, eval_o, sweep_o;
    std::string checkpoint;
    std::string sweep_param;
    std::vector<std::string> sweep_values;

    CLI::App* train_cmd = app.add_subcommand("train", "train a policy and write metrics/checkpoint");
    add_common(train_cmd, train_o);

    CLI::App* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    add_common(eval_cmd, eval_o);
    eval_cmd->add_option("--checkpoint", checkpoint,
                         "checkpoint JSON (optional for the random policy)");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "train/eval once per parameter value");
    add_common(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--param", sweep_param, "devWeight|gdCount|offloadCap|seed|ratioSet")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated list of values")
        ->required()
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            uavei::cmd_train(load_with_overrides(train_o));
        } else if (eval_cmd->parsed()) {
            uavei::cmd_eval(load_with_overrides(eval_o), checkpoint);
        } else {
            uavei::cmd_sweep(load_with_overrides(sweep_o), sweep_param, sweep_values);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
