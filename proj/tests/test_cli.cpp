#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "hystkin/cli.hpp"
#include "test_util.hpp"

using hystkin::ErrorKind;
using hystkin::cli::Command;
using hystkin::cli::RunConfig;
using testutil::kind_of;
using testutil::TempDir;
using testutil::write_text;

namespace {

RunConfig small_generate(const std::filesystem::path& out, std::uint64_t seed = 7) {
    RunConfig cfg;
    cfg.command = Command::generate;
    cfg.preset = "pitch-like";
    cfg.cycles = 6;
    cfg.steps = 60;
    cfg.noise_sigma = 0.1;
    cfg.seed = seed;
    cfg.out = out;
    return cfg;
}

}  // namespace

TEST_CASE("cli pipeline: generate, train, evaluate, invert, report") {
    TempDir tmp;
    const auto data = tmp.file("data.csv");
    REQUIRE(hystkin::cli::run(small_generate(data)) == 0);

    const hystkin::CycleDataset ds = hystkin::load_csv(data, -1.0, 1.0);
    CHECK(ds.cycles == 6);
    CHECK(ds.points_per_cycle == 60);

    RunConfig train;
    train.command = Command::train;
    train.data = data;
    train.train_cycles = 4;
    train.k_nominal = train.k_cw = train.k_ccw = 5;
    train.seed = 7;
    train.out = tmp.file("model");
    REQUIRE(hystkin::cli::run(train) == 0);
    CHECK(std::filesystem::exists(tmp.file("model") / "nominal"));
    CHECK(std::filesystem::exists(tmp.file("model") / "fit_report.txt"));

    RunConfig eval;
    eval.command = Command::evaluate;
    eval.data = data;
    eval.train_cycles = 4;
    eval.model = tmp.file("model");
    eval.out = tmp.file("results");
    REQUIRE(hystkin::cli::run(eval) == 0);
    const std::string results = hystkin::read_file(tmp.file("results") / "results.csv");
    CHECK(results.rfind("rmse_nominal,rmse_compensated,improvement_pct\n", 0) == 0);
    CHECK(std::filesystem::exists(tmp.file("results") / "per_sample.csv"));
    CHECK(std::filesystem::exists(tmp.file("results") / "overlay.svg"));

    RunConfig invert;
    invert.command = Command::invert;
    invert.model = tmp.file("model");
    invert.targets = {-20.0, 0.0, 25.0};
    invert.invert_epsilon = 0.05;
    invert.out = tmp.file("solutions.csv");
    REQUIRE(hystkin::cli::run(invert) == 0);
    const std::string solutions = hystkin::read_file(tmp.file("solutions.csv"));
    CHECK(solutions.rfind("gamma_des,q_star,gamma_achieved,iterations,converged,branch_trace\n", 0) == 0);
    CHECK(solutions.find("\n-20,") != std::string::npos);

    RunConfig report;
    report.command = Command::report;
    report.dir = tmp.file("results");
    REQUIRE(hystkin::cli::run(report) == 0);
    const std::string text = hystkin::read_file(tmp.file("results") / "report.txt");
    CHECK(text.find("tip_error_compensated_um:") != std::string::npos);
    CHECK(text.find("rmse_nominal_deg:") != std::string::npos);
}

TEST_CASE("cli generate is deterministic and overwrites atomically") {
    TempDir tmp;
    const auto a = tmp.file("a.csv");
    const auto b = tmp.file("b.csv");
    REQUIRE(hystkin::cli::run(small_generate(a, 99)) == 0);
    REQUIRE(hystkin::cli::run(small_generate(b, 99)) == 0);
    CHECK(hystkin::read_file(a) == hystkin::read_file(b));

    // Re-running over an existing output replaces it.
    REQUIRE(hystkin::cli::run(small_generate(a, 99)) == 0);
    CHECK(hystkin::read_file(a) == hystkin::read_file(b));

    REQUIRE(hystkin::cli::run(small_generate(a, 100)) == 0);
    CHECK(hystkin::read_file(a) != hystkin::read_file(b));
}

TEST_CASE("cli select-k emits the criteria table and plot") {
    TempDir tmp;
    const auto data = tmp.file("data.csv");
    REQUIRE(hystkin::cli::run(small_generate(data)) == 0);

    RunConfig select;
    select.command = Command::select_k;
    select.data = data;
    select.select_train_cycles = 0;  // whole dataset
    select.k_min = 1;
    select.k_max = 4;
    select.seed = 7;
    select.out = tmp.file("selection");
    REQUIRE(hystkin::cli::run(select) == 0);

    const std::string table = hystkin::read_file(tmp.file("selection") / "bic_aic.csv");
    CHECK(table.rfind("k,bic,aic\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);  // header + 4 rows
    const std::string svg = hystkin::read_file(tmp.file("selection") / "bic_aic.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
}

TEST_CASE("cli errors carry their category") {
    TempDir tmp;

    SECTION("missing data file is an io error") {
        RunConfig train;
        train.command = Command::train;
        train.data = tmp.file("absent.csv");
        train.out = tmp.file("model");
        const auto kind = kind_of([&] { hystkin::cli::run(train); });
        REQUIRE(kind.has_value());
        CHECK(hystkin::category_of(*kind) == hystkin::ErrorCategory::io);
    }
    SECTION("bad preset is a config error") {
        RunConfig gen = small_generate(tmp.file("x.csv"));
        gen.preset = "diagonal-like";
        const auto kind = kind_of([&] { hystkin::cli::run(gen); });
        REQUIRE(kind.has_value());
        CHECK(hystkin::category_of(*kind) == hystkin::ErrorCategory::config);
    }
    SECTION("unreachable targets exit with the dedicated status") {
        const auto data = tmp.file("data.csv");
        REQUIRE(hystkin::cli::run(small_generate(data)) == 0);
        RunConfig train;
        train.command = Command::train;
        train.data = data;
        train.train_cycles = 4;
        train.k_nominal = train.k_cw = train.k_ccw = 4;
        train.seed = 7;
        train.out = tmp.file("model");
        REQUIRE(hystkin::cli::run(train) == 0);

        RunConfig invert;
        invert.command = Command::invert;
        invert.model = tmp.file("model");
        invert.targets = {500.0};
        invert.out = tmp.file("solutions.csv");
        CHECK(hystkin::cli::run(invert) ==
              hystkin::cli::error_exit_code(hystkin::ErrorCategory::unreachable));
        // The best-effort row is still written.
        CHECK(std::filesystem::exists(tmp.file("solutions.csv")));
    }
    SECTION("targets file feeds the solver") {
        const auto data = tmp.file("data.csv");
        REQUIRE(hystkin::cli::run(small_generate(data)) == 0);
        RunConfig train;
        train.command = Command::train;
        train.data = data;
        train.train_cycles = 4;
        train.k_nominal = train.k_cw = train.k_ccw = 4;
        train.seed = 7;
        train.out = tmp.file("model");
        REQUIRE(hystkin::cli::run(train) == 0);

        write_text(tmp.file("targets.txt"), "5.0\n-10.0\n");
        RunConfig invert;
        invert.command = Command::invert;
        invert.model = tmp.file("model");
        invert.targets_file = tmp.file("targets.txt");
        invert.out = tmp.file("solutions.csv");
        CHECK(hystkin::cli::run(invert) == 0);
    }
}
