#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hystkin/dataset.hpp"
#include "hystkin/errors.hpp"
#include "hystkin/gmm.hpp"
#include "hystkin/hysteresis.hpp"
#include "hystkin/log.hpp"
#include "hystkin/model_io.hpp"
#include "hystkin/simulator.hpp"
#include "hystkin/svg.hpp"

namespace hystkin::cli {

enum class Command { generate, train, select_k, evaluate, invert, report };

// One validated batch invocation. Precedence of sources (flags over config
// file over defaults) is resolved by the flag parser before run() sees it.
struct RunConfig {
    Command command = Command::generate;

    std::uint64_t seed = 7;
    double q_min = -1.0;
    double q_max = 1.0;

    // generate
    std::string preset = "pitch-like";
    int cycles = 9;
    int steps = 200;
    double amplitude = 1.0;
    double noise_sigma = 0.15;
    bool warm_up = true;

    // train / select-k / evaluate
    std::filesystem::path data;
    int train_cycles = 6;
    int select_train_cycles = 0;  // select-k default: sweep the whole file
    int k_nominal = 9;
    int k_cw = 9;
    int k_ccw = 9;
    double epsilon = 0.05;
    int k_min = 1;
    int k_max = 15;
    std::filesystem::path model;

    // invert
    std::vector<double> targets;
    std::filesystem::path targets_file;
    double q_start = 0.0;
    double invert_epsilon = 0.0;  // 0: use the bundle's stored tolerance

    // report
    std::filesystem::path dir;
    double arm_length_mm = 3.0;

    std::filesystem::path out;
};

inline const char* error_code_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::io: return "E_IO";
        case ErrorCategory::config: return "E_CONFIG";
        case ErrorCategory::em: return "E_EM";
        case ErrorCategory::unreachable: return "E_UNREACHABLE";
    }
    return "E_CONFIG";
}

inline int error_exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::io: return 2;
        case ErrorCategory::config: return 3;
        case ErrorCategory::unreachable: return 4;
        case ErrorCategory::em: return 5;
    }
    return 3;
}

namespace detail_cli {

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) raise(ErrorKind::io_failure, "cannot create directory '" + dir.string() + "'");
}

inline std::string fmt(double v) { return hystkin::detail::format_double(v); }

// Training cycles may equal the cycle count, meaning "train on everything".
inline CycleDataset training_portion(const CycleDataset& ds, int train_cycles) {
    if (train_cycles == ds.cycles) return ds;
    return train_test_split(ds, train_cycles).first;
}

inline std::string fit_report_text(const char* name, const FitReport& r, int k) {
    std::ostringstream out;
    out << "model " << name << " K=" << k << " iterations=" << r.iterations
        << " converged=" << (r.converged ? "yes" : "no") << " seed=" << r.seed
        << " final_log_likelihood=" << fmt(r.final_log_likelihood()) << '\n';
    out << "trace";
    for (double v : r.log_likelihood_trace) out << ' ' << fmt(v);
    out << '\n';
    return out.str();
}

inline int run_generate(const RunConfig& cfg) {
    if (cfg.out.empty()) raise(ErrorKind::bad_config, "generate needs --out");
    BacklashPlant plant = make_preset_plant(cfg.preset, cfg.noise_sigma, cfg.seed);
    CycleDataset ds = generate_dataset(plant, cfg.cycles, cfg.steps, cfg.amplitude, cfg.warm_up);
    atomic_write_file(cfg.out, to_csv_string(ds));
    log::info("wrote " + std::to_string(ds.samples.size()) + " samples to " + cfg.out.string());
    return 0;
}

inline int run_train(const RunConfig& cfg) {
    if (cfg.data.empty() || cfg.out.empty()) raise(ErrorKind::bad_config, "train needs --data and --out");
    const CycleDataset ds = load_csv(cfg.data, cfg.q_min, cfg.q_max);
    const CycleDataset train = training_portion(ds, cfg.train_cycles);
    const TrainingResult trained =
        train_hysteresis_model(train, cfg.k_nominal, cfg.k_cw, cfg.k_ccw, cfg.seed);
    ensure_directory(cfg.out);
    save_model_bundle(cfg.out, trained.model, cfg.epsilon);
    std::string report = fit_report_text("nominal", trained.nominal_report, cfg.k_nominal) +
                         fit_report_text("cw", trained.cw_report, cfg.k_cw) +
                         fit_report_text("ccw", trained.ccw_report, cfg.k_ccw);
    atomic_write_file(cfg.out / "fit_report.txt", report);
    log::info("trained model bundle in " + cfg.out.string());
    return 0;
}

inline int run_select_k(const RunConfig& cfg) {
    if (cfg.data.empty() || cfg.out.empty())
        raise(ErrorKind::bad_config, "select-k needs --data and --out");
    const CycleDataset ds = load_csv(cfg.data, cfg.q_min, cfg.q_max);
    const CycleDataset train =
        cfg.select_train_cycles > 0 ? training_portion(ds, cfg.select_train_cycles) : ds;
    const SelectKResult result = select_k(to_matrix(train), cfg.k_min, cfg.k_max, cfg.seed);

    ensure_directory(cfg.out);
    std::ostringstream csv;
    csv << "k,bic,aic\n";
    std::vector<double> ks;
    std::vector<double> bics;
    std::vector<double> aics;
    for (const KCriteria& row : result.table) {
        csv << row.k << ',' << fmt(row.bic) << ',' << fmt(row.aic) << '\n';
        ks.push_back(row.k);
        bics.push_back(row.bic);
        aics.push_back(row.aic);
    }
    atomic_write_file(cfg.out / "bic_aic.csv", csv.str());

    SvgPlot plot("model selection", "K", "criterion");
    plot.add_line(ks, bics, "#1f77b4", "BIC");
    plot.add_line(ks, aics, "#d62728", "AIC");
    plot.add_scatter(ks, bics, "#1f77b4");
    plot.add_scatter(ks, aics, "#d62728");
    atomic_write_file(cfg.out / "bic_aic.svg", plot.render());

    log::info("best K: BIC=" + std::to_string(result.best_k_bic) +
              " AIC=" + std::to_string(result.best_k_aic));
    return 0;
}

inline int run_evaluate(const RunConfig& cfg) {
    if (cfg.data.empty() || cfg.model.empty() || cfg.out.empty())
        raise(ErrorKind::bad_config, "evaluate needs --data, --model and --out");
    const CycleDataset ds = load_csv(cfg.data, cfg.q_min, cfg.q_max);
    const auto [train, test] = train_test_split(ds, cfg.train_cycles);
    const ModelBundle bundle = load_model_bundle(cfg.model);
    const EvaluationReport report = evaluate(bundle.model, test);

    ensure_directory(cfg.out);
    std::ostringstream results;
    results << "rmse_nominal,rmse_compensated,improvement_pct\n"
            << fmt(report.rmse_nominal) << ',' << fmt(report.rmse_compensated) << ','
            << fmt(report.improvement_pct) << '\n';
    atomic_write_file(cfg.out / "results.csv", results.str());

    std::ostringstream rows;
    rows << "cycle_id,step_index,q,gamma,direction,pred_nominal,pred_compensated\n";
    for (const SampleError& r : report.per_sample) {
        rows << r.cycle_id << ',' << r.step_index << ',' << fmt(r.q) << ',' << fmt(r.gamma) << ','
             << r.direction << ',' << fmt(r.predicted_nominal) << ','
             << fmt(r.predicted_compensated) << '\n';
    }
    atomic_write_file(cfg.out / "per_sample.csv", rows.str());

    // Test data over the three model curves.
    SvgPlot plot("hysteresis model overlay", "control input q", "bending angle (deg)");
    std::vector<double> xs;
    std::vector<double> ys;
    for (const Sample& s : test.samples) {
        xs.push_back(s.q);
        ys.push_back(s.gamma);
    }
    plot.add_scatter(xs, ys, "#7f7f7f", "test data");
    std::vector<double> grid;
    for (int i = 0; i <= 240; ++i)
        grid.push_back(bundle.model.q_min +
                       (bundle.model.q_max - bundle.model.q_min) * static_cast<double>(i) / 240.0);
    const auto curve = [&](const GmrModel& m) {
        std::vector<double> vals;
        vals.reserve(grid.size());
        for (double q : grid) vals.push_back(predict(m, q).mean);
        return vals;
    };
    plot.add_line(grid, curve(bundle.model.nominal), "#2ca02c", "nominal");
    plot.add_line(grid, curve(bundle.model.cw), "#1f77b4", "cw (ascending)");
    plot.add_line(grid, curve(bundle.model.ccw), "#d62728", "ccw (descending)");
    atomic_write_file(cfg.out / "overlay.svg", plot.render());

    log::info("rmse nominal " + fmt(report.rmse_nominal) + " deg, compensated " +
              fmt(report.rmse_compensated) + " deg");
    return 0;
}

inline int run_invert(const RunConfig& cfg) {
    if (cfg.model.empty() || cfg.out.empty())
        raise(ErrorKind::bad_config, "invert needs --model and --out");
    std::vector<double> targets = cfg.targets;
    if (!cfg.targets_file.empty()) {
        std::istringstream in(read_file(cfg.targets_file));
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            targets.push_back(hystkin::detail::parse_double_field(
                line, cfg.targets_file.string() + ":" + std::to_string(line_no)));
        }
    }
    if (targets.empty()) raise(ErrorKind::bad_config, "invert needs at least one target angle");

    const ModelBundle bundle = load_model_bundle(cfg.model);
    SolverState state = default_solver_state(bundle.model);
    state.epsilon = cfg.invert_epsilon > 0.0 ? cfg.invert_epsilon : bundle.epsilon;
    state.q_prev = cfg.q_start;

    std::ostringstream csv;
    csv << "gamma_des,q_star,gamma_achieved,iterations,converged,branch_trace\n";
    int unconverged = 0;
    for (double gamma_des : targets) {
        const InverseSolution sol = solve_inverse(bundle.model, state, gamma_des);
        int n_nom = 0;
        int n_cw = 0;
        int n_ccw = 0;
        for (ModelChoice c : sol.branch_trace) {
            if (c == ModelChoice::nominal) ++n_nom;
            if (c == ModelChoice::cw) ++n_cw;
            if (c == ModelChoice::ccw) ++n_ccw;
        }
        csv << fmt(gamma_des) << ',' << fmt(sol.q_star) << ',' << fmt(sol.gamma_achieved) << ','
            << sol.iterations << ',' << (sol.converged ? 1 : 0) << ',' << "n=" << n_nom
            << "|cw=" << n_cw << "|ccw=" << n_ccw << '\n';
        if (!sol.converged) ++unconverged;
    }
    atomic_write_file(cfg.out, csv.str());
    if (unconverged > 0) {
        std::cerr << "E_UNREACHABLE: " << unconverged << " of " << targets.size()
                  << " targets did not converge\n";
        return error_exit_code(ErrorCategory::unreachable);
    }
    log::info("solved " + std::to_string(targets.size()) + " targets into " + cfg.out.string());
    return 0;
}

inline int run_report(const RunConfig& cfg) {
    if (cfg.dir.empty()) raise(ErrorKind::bad_config, "report needs --dir");
    const std::filesystem::path results_path = cfg.dir / "results.csv";
    std::istringstream in(read_file(results_path));
    std::string header;
    std::string row;
    if (!std::getline(in, header) || !std::getline(in, row))
        raise(ErrorKind::bad_format, results_path.string() + ": expected a header and one row");
    if (!row.empty() && row.back() == '\r') row.pop_back();
    const auto fields = hystkin::detail::split_fields(row);
    if (fields.size() != 3)
        raise(ErrorKind::bad_format, results_path.string() + ": expected 3 columns");
    const double rmse_nominal =
        hystkin::detail::parse_double_field(fields[0], results_path.string());
    const double rmse_comp = hystkin::detail::parse_double_field(fields[1], results_path.string());
    const double improvement =
        hystkin::detail::parse_double_field(fields[2], results_path.string());

    // Angle error to tip error via arc length.
    const double deg_to_um = M_PI / 180.0 * cfg.arm_length_mm * 1000.0;
    std::ostringstream report;
    report << "hystkin experiment report\n";
    report << "directory: " << cfg.dir.string() << '\n';
    report << "arm_length_mm: " << fmt(cfg.arm_length_mm) << '\n';
    report << "rmse_nominal_deg: " << fmt(rmse_nominal) << '\n';
    report << "rmse_compensated_deg: " << fmt(rmse_comp) << '\n';
    report << "improvement_pct: " << fmt(improvement) << '\n';
    report << "tip_error_nominal_um: " << fmt(rmse_nominal * deg_to_um) << '\n';
    report << "tip_error_compensated_um: " << fmt(rmse_comp * deg_to_um) << '\n';
    atomic_write_file(cfg.dir / "report.txt", report.str());
    std::cout << report.str();
    return 0;
}

}  // namespace detail_cli

// Executes one validated command; returns the process exit status.
inline int run(const RunConfig& cfg) {
    switch (cfg.command) {
        case Command::generate: return detail_cli::run_generate(cfg);
        case Command::train: return detail_cli::run_train(cfg);
        case Command::select_k: return detail_cli::run_select_k(cfg);
        case Command::evaluate: return detail_cli::run_evaluate(cfg);
        case Command::invert: return detail_cli::run_invert(cfg);
        case Command::report: return detail_cli::run_report(cfg);
    }
    raise(ErrorKind::bad_config, "unknown command");
}

}  // namespace hystkin::cli
