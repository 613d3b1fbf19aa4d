// hystkin command-line tool: dataset generation, model training and
// selection, evaluation, inverse solving and report emission.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hystkin/cli.hpp"

namespace {

void add_common(CLI::App* cmd, hystkin::cli::RunConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "RNG seed for every random choice in the command");
    cmd->add_option("--q-min", cfg.q_min, "lower input bound");
    cmd->add_option("--q-max", cfg.q_max, "upper input bound");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hystkin: hysteresis-compensated kinematics modeling"};
    app.require_subcommand(1);
    // Subcommand options live under a [subcommand] section in the file;
    // values given on the command line take precedence.
    app.set_config("--config", "", "read defaults from a TOML-style config file");

    hystkin::cli::RunConfig cfg;

    CLI::App* generate = app.add_subcommand("generate", "simulate a reciprocating-cycle dataset");
    generate->add_option("--preset", cfg.preset, "plant preset: yaw-like or pitch-like");
    generate->add_option("--cycles", cfg.cycles, "number of reciprocating cycles");
    generate->add_option("--steps", cfg.steps, "steps per cycle (even)");
    generate->add_option("--amplitude", cfg.amplitude, "sweep amplitude in normalized input units");
    generate->add_option("--noise-sigma", cfg.noise_sigma, "measurement noise sigma in degrees");
    generate->add_flag("!--no-warmup", cfg.warm_up, "keep the from-home transient in cycle 0");
    generate->add_option("--out", cfg.out, "output dataset CSV")->required();
    add_common(generate, cfg);

    CLI::App* train = app.add_subcommand("train", "fit the nominal/cw/ccw model bundle");
    std::vector<int> k_counts;
    train->add_option("--data", cfg.data, "dataset CSV")->required();
    train->add_option("--train-cycles", cfg.train_cycles, "cycles used for training");
    train->add_option("--k", k_counts, "component counts: nominal cw ccw")->expected(3);
    train->add_option("--epsilon", cfg.epsilon, "solver tolerance stored in the bundle (deg)");
    train->add_option("--out", cfg.out, "output model bundle directory")->required();
    add_common(train, cfg);

    CLI::App* select = app.add_subcommand("select-k", "sweep K and emit the BIC/AIC table and plot");
    select->add_option("--data", cfg.data, "dataset CSV")->required();
    select->add_option("--train-cycles", cfg.select_train_cycles, "cycles used for the sweep (0 = all)");
    select->add_option("--k-min", cfg.k_min, "smallest K");
    select->add_option("--k-max", cfg.k_max, "largest K");
    select->add_option("--out", cfg.out, "output directory")->required();
    add_common(select, cfg);

    CLI::App* eval = app.add_subcommand("evaluate", "compare nominal vs compensated RMSE on test cycles");
    eval->add_option("--data", cfg.data, "dataset CSV")->required();
    eval->add_option("--train-cycles", cfg.train_cycles, "cycles excluded from the test set");
    eval->add_option("--model", cfg.model, "model bundle directory")->required();
    eval->add_option("--out", cfg.out, "output directory")->required();
    add_common(eval, cfg);

    CLI::App* invert = app.add_subcommand("invert", "solve inverse kinematics for target angles");
    invert->add_option("--model", cfg.model, "model bundle directory")->required();
    invert->add_option("--target", cfg.targets, "target angle in degrees (repeatable)");
    invert->add_option("--targets-file", cfg.targets_file, "file with one target angle per line");
    invert->add_option("--epsilon", cfg.invert_epsilon,
                       "convergence tolerance in degrees (default: the bundle's)");
    invert->add_option("--q-start", cfg.q_start, "initial last-commanded input");
    invert->add_option("--out", cfg.out, "output CSV of solutions")->required();
    add_common(invert, cfg);

    CLI::App* report = app.add_subcommand("report", "summarize an experiment directory");
    report->add_option("--dir", cfg.dir, "directory containing results.csv")->required();
    report->add_option("--arm-length-mm", cfg.arm_length_mm, "arm length for tip-error conversion");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_CONFIG: " << e.what() << '\n';
        return hystkin::cli::error_exit_code(hystkin::ErrorCategory::config);
    }

    if (k_counts.size() == 3) {
        cfg.k_nominal = k_counts[0];
        cfg.k_cw = k_counts[1];
        cfg.k_ccw = k_counts[2];
    }
    if (generate->parsed()) cfg.command = hystkin::cli::Command::generate;
    if (train->parsed()) cfg.command = hystkin::cli::Command::train;
    if (select->parsed()) cfg.command = hystkin::cli::Command::select_k;
    if (eval->parsed()) cfg.command = hystkin::cli::Command::evaluate;
    if (invert->parsed()) cfg.command = hystkin::cli::Command::invert;
    if (report->parsed()) cfg.command = hystkin::cli::Command::report;

    try {
        return hystkin::cli::run(cfg);
    } catch (const hystkin::Error& e) {
        std::cerr << hystkin::cli::error_code_name(e.category()) << ": " << e.what() << '\n';
        return hystkin::cli::error_exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "E_IO: " << e.what() << '\n';
        return hystkin::cli::error_exit_code(hystkin::ErrorCategory::io);
    }
}
