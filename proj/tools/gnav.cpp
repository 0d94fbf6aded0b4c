#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gnav/run.hpp"

namespace {

int dispatch(int argc, char** argv) {
    CLI::App app{"goal navigation on pose-graph replay environments"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-env", "generate a synthetic environment");
    std::string gen_spec, gen_out = "env";
    uint64_t gen_seed = 1;
    gen->add_option("--spec", gen_spec, "environment spec file")->required();
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "output directory");

    auto* train = app.add_subcommand("train", "train an agent");
    std::string train_config, train_out = "run", train_resume;
    bool train_serial = false;
    train->add_option("--config", train_config, "run config file")->required();
    train->add_option("--out", train_out, "output directory");
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_flag("--serial", train_serial, "disable worker parallelism");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_config, eval_checkpoint, eval_out = "eval", eval_mode = "both",
                eval_traj;
    eval->add_option("--config", eval_config, "run config file")->required();
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--mode", eval_mode, "train | val | both");
    eval->add_option("--traj-out", eval_traj, "write one greedy trajectory here");

    auto* baseline = app.add_subcommand("baseline", "random-walk baseline");
    std::string base_graph, base_prior = "intersection", base_out = "baseline.txt";
    int base_episodes = 100, base_tmax = 3000, base_subgoals = 10;
    uint64_t base_seed = 1;
    baseline->add_option("--graph", base_graph, "pose graph file")->required();
    baseline->add_option("--prior", base_prior, "uniform | intersection");
    baseline->add_option("--episodes", base_episodes, "episode count");
    baseline->add_option("--t-max", base_tmax, "episode length");
    baseline->add_option("--subgoals", base_subgoals, "sub-goal count");
    baseline->add_option("--seed", base_seed, "layout and walk seed");
    baseline->add_option("--out", base_out, "report file");

    auto* plot = app.add_subcommand("plot-data", "export aligned learning curves");
    std::vector<std::string> plot_train, plot_val;
    std::string plot_out = "curves.txt";
    plot->add_option("--train", plot_train, "train metrics files, one per seed")->required();
    plot->add_option("--val", plot_val, "validation metrics files, aligned with --train");
    plot->add_option("--out", plot_out, "output file");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        gnav::run_gen_env(gen_spec, gen_seed, gen_out);
    } else if (train->parsed()) {
        gnav::run_train(train_config, train_out, train_resume, !train_serial);
    } else if (eval->parsed()) {
        gnav::run_eval(eval_config, eval_checkpoint, eval_out, eval_mode, eval_traj);
    } else if (baseline->parsed()) {
        gnav::run_baseline(base_graph, base_prior, base_episodes, base_tmax, base_subgoals,
                           base_seed, base_out);
    } else if (plot->parsed()) {
        if (!plot_val.empty() && plot_val.size() != plot_train.size())
            throw gnav::ConfigError("--val must list one file per --train file");
        std::vector<std::pair<std::string, std::string>> pairs;
        for (size_t i = 0; i < plot_train.size(); ++i)
            pairs.emplace_back(plot_train[i], plot_val.empty() ? "" : plot_val[i]);
        gnav::run_plot_data(pairs, plot_out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const gnav::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const gnav::GraphError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const gnav::DivergenceError& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return 3;
    } catch (const gnav::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
