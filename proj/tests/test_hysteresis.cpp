#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hystkin/hysteresis.hpp"
#include "hystkin/simulator.hpp"
#include "test_util.hpp"

using hystkin::BacklashPlant;
using hystkin::BranchLabel;
using hystkin::CycleDataset;
using hystkin::ErrorKind;
using hystkin::HysteresisModel;
using hystkin::InverseSolution;
using hystkin::ModelChoice;
using hystkin::SolverState;
using testutil::kind_of;

namespace {

struct Fixture {
    std::string preset;
    double noise_sigma = 0.0;
    CycleDataset data;
    hystkin::TrainingResult trained;
    SolverState base_state;
};

Fixture make_fixture(const std::string& preset, double noise_sigma, int cycles, int steps,
                     std::uint64_t seed, int k_branch = 9) {
    Fixture f;
    f.preset = preset;
    f.noise_sigma = noise_sigma;
    BacklashPlant plant = hystkin::make_preset_plant(preset, noise_sigma, seed);
    f.data = hystkin::generate_dataset(plant, cycles, steps, 1.0);
    f.trained = hystkin::train_hysteresis_model(f.data, 9, k_branch, k_branch, seed);
    f.base_state = hystkin::default_solver_state(f.trained.model);
    return f;
}

// Noisy yaw-like fixture for forward-model tests.
const Fixture& yaw_fixture() {
    static const Fixture f = make_fixture("yaw-like", 0.15, 6, 200, 42);
    return f;
}

// Noisy pitch-like fixture for inverse round trips; landings are checked on
// a noise-free plant.
const Fixture& pitch_fixture() {
    static const Fixture f = make_fixture("pitch-like", 0.15, 6, 200, 7, 12);
    return f;
}

// Drives a fresh noise-free plant monotonically from one end to q_star and
// returns the settled angle.
double plant_landing(const std::string& preset, double q_star, int direction) {
    BacklashPlant plant = hystkin::make_preset_plant(preset, 0.0, 1);
    const double start = direction > 0 ? plant.q_min() : plant.q_max();
    plant.step(start);
    const int steps = 200;
    double gamma = 0.0;
    for (int i = 1; i <= steps; ++i) {
        const double q = start + (q_star - start) * static_cast<double>(i) / steps;
        gamma = plant.step(q);
    }
    return gamma;
}

}  // namespace

TEST_CASE("armijo accepts the full step on a gentle quadratic") {
    const double g = 2.0;
    const double target = 1.0;
    const auto cost = [&](double q) {
        const double e = target - g * q;
        return 0.5 * e * e;
    };
    const auto result = hystkin::armijo_step(cost, 0.0, target - g * 0.0, 0.4, 1e-4, 0.5);
    CHECK_FALSE(result.failed);
    CHECK(result.alpha == Catch::Approx(0.4));
}

TEST_CASE("armijo fails on an uphill direction") {
    const auto cost = [](double q) { return 0.5 * (1.0 - 2.0 * q) * (1.0 - 2.0 * q); };
    const auto result = hystkin::armijo_step(cost, 0.0, -1.0, 0.4, 1e-4, 0.5);
    CHECK(result.failed);
    CHECK(result.alpha == 0.0);
}

TEST_CASE("armijo steps on the regression objective never increase the cost") {
    const Fixture& f = yaw_fixture();
    const hystkin::GmrModel& nominal = f.trained.model.nominal;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uq(-0.9, 0.9);
    std::uniform_real_distribution<double> ug(-40.0, 40.0);
    for (int i = 0; i < 10; ++i) {
        const double q = uq(rng);
        const double target = ug(rng);
        const auto cost = [&](double qq) {
            const double e = target - hystkin::predict(nominal, qq).mean;
            return 0.5 * e * e;
        };
        const double d = target - hystkin::predict(nominal, q).mean;
        if (d == 0.0) continue;
        const auto result = hystkin::armijo_step(cost, q, d, f.base_state.alpha_0, 1e-4, 0.5);
        if (!result.failed) CHECK(cost(q + result.alpha * d) <= cost(q) + 1e-12);
    }
}

TEST_CASE("training fits the three curves on the expected sample counts") {
    const Fixture& f = yaw_fixture();
    CHECK(f.trained.model.k_nominal == 9);
    CHECK(f.trained.model.nominal.k() == 9);
    CHECK(f.trained.model.cw.k() == 9);
    CHECK(f.trained.model.ccw.k() == 9);
    // 6 cycles x 200 steps: nominal sees all 1200, each branch half of them.
    CHECK(f.data.samples.size() == 1200);
    const hystkin::BranchSplit split = hystkin::split_cycles(f.data);
    CHECK(split.ascending.size() == 600);
    CHECK(split.descending.size() == 600);
    CHECK(f.trained.nominal_report.converged);
    CHECK(f.trained.cw_report.converged);
    CHECK(f.trained.ccw_report.converged);
}

TEST_CASE("training rejects too little data") {
    BacklashPlant plant = hystkin::make_preset_plant("yaw-like", 0.0, 3);
    const CycleDataset one = hystkin::generate_dataset(plant, 1, 20, 1.0);
    CHECK(kind_of([&] { hystkin::train_hysteresis_model(one, 3, 3, 3, 1); }) ==
          ErrorKind::invalid_split);

    BacklashPlant plant2 = hystkin::make_preset_plant("yaw-like", 0.0, 3);
    const CycleDataset tiny = hystkin::generate_dataset(plant2, 2, 4, 1.0);
    CHECK(kind_of([&] { hystkin::train_hysteresis_model(tiny, 2, 5, 2, 1); }) ==
          ErrorKind::empty_branch);
}

TEST_CASE("cw curve lies at or below ccw curve over the interior range") {
    const Fixture& f = yaw_fixture();
    const double slack = 2.0 * f.noise_sigma;
    for (int i = 0; i <= 100; ++i) {
        const double q = -0.85 + 1.7 * static_cast<double>(i) / 100.0;
        const double up = hystkin::predict(f.trained.model.cw, q).mean;
        const double down = hystkin::predict(f.trained.model.ccw, q).mean;
        CHECK(up <= down + slack);
    }
}

TEST_CASE("predict_directional picks the branch from the step direction") {
    const Fixture& f = yaw_fixture();
    const HysteresisModel& m = f.trained.model;
    BacklashPlant plant = hystkin::make_preset_plant(f.preset, 0.0, 1);

    SECTION("no motion uses the nominal model") {
        const double q = 0.3;
        CHECK(hystkin::predict_directional(m, q, q).mean ==
              Catch::Approx(hystkin::predict(m.nominal, q).mean).margin(1e-15));
    }
    SECTION("ascending motion tracks the plant's lower branch") {
        for (int i = 0; i <= 40; ++i) {
            const double q = -0.9 + 1.8 * static_cast<double>(i) / 40.0;
            const double predicted = hystkin::predict_directional(m, q, q - 0.01).mean;
            CHECK(std::abs(predicted - plant.ascending_value(q)) <= 3.0 * f.noise_sigma);
        }
    }
    SECTION("descending motion tracks the plant's upper branch") {
        for (int i = 0; i <= 40; ++i) {
            const double q = -0.9 + 1.8 * static_cast<double>(i) / 40.0;
            const double predicted = hystkin::predict_directional(m, q, q + 0.01).mean;
            CHECK(std::abs(predicted - plant.descending_value(q)) <= 3.0 * f.noise_sigma);
        }
    }
    SECTION("non-finite inputs are rejected") {
        CHECK(kind_of([&] { hystkin::predict_directional(m, std::nan(""), 0.0); }) ==
              ErrorKind::non_finite_input);
    }
}

TEST_CASE("nominal_inverse") {
    const Fixture& f = pitch_fixture();
    const HysteresisModel& m = f.trained.model;

    SECTION("symmetric plant: zero angle solves near the loop center") {
        SolverState state = f.base_state;
        const double q_n = hystkin::nominal_inverse(m, 0.0, state);
        CHECK(std::abs(hystkin::predict(m.nominal, q_n).mean) < state.epsilon);
        CHECK(std::abs(q_n) < 0.05);
    }
    SECTION("target beyond the achievable range is unreachable") {
        SolverState state = f.base_state;
        CHECK(kind_of([&] { hystkin::nominal_inverse(m, 60.0, state); }) == ErrorKind::unreachable);
    }
    SECTION("mid-range targets converge by forward evaluation") {
        SolverState state = f.base_state;
        for (double target : {-30.0, -12.5, 3.0, 27.75}) {
            const double q_n = hystkin::nominal_inverse(m, target, state);
            CHECK(std::abs(target - hystkin::predict(m.nominal, q_n).mean) < state.epsilon);
        }
    }
    SECTION("non-finite target rejected") {
        SolverState state = f.base_state;
        CHECK(kind_of([&] { hystkin::nominal_inverse(m, std::nan(""), state); }) ==
              ErrorKind::non_finite_target);
    }
}

TEST_CASE("solve_inverse round trips against the analytic plant") {
    const Fixture& f = pitch_fixture();
    const HysteresisModel& m = f.trained.model;
    BacklashPlant plant = hystkin::make_preset_plant(f.preset, 0.0, 1);
    const double w = plant.width();

    SECTION("approach from below lands on the ascending solution") {
        SolverState state = f.base_state;
        state.q_prev = m.q_min;
        state.last_direction = -1;
        const double target = 20.0;
        const InverseSolution sol = hystkin::solve_inverse(m, state, target);
        CHECK(sol.converged);
        const double q_expected = plant.analytic_inverse(target, BranchLabel::ascending);
        CHECK(std::abs(sol.q_star - q_expected) < 0.02);
        CHECK(std::abs(plant_landing(f.preset, sol.q_star, +1) - target) < 0.2);
    }
    SECTION("approach from above lands on the descending solution, one width lower") {
        const double target = 20.0;
        SolverState below = f.base_state;
        below.q_prev = m.q_min;
        below.last_direction = -1;
        const InverseSolution from_below = hystkin::solve_inverse(m, below, target);

        SolverState above = f.base_state;
        above.q_prev = m.q_max;
        above.last_direction = +1;
        const InverseSolution from_above = hystkin::solve_inverse(m, above, target);

        CHECK(from_above.converged);
        const double q_expected = plant.analytic_inverse(target, BranchLabel::descending);
        CHECK(std::abs(from_above.q_star - q_expected) < 0.02);
        CHECK(std::abs(plant_landing(f.preset, from_above.q_star, -1) - target) < 0.2);
        // The two possible control inputs differ by about the loop width.
        CHECK(from_below.q_star - from_above.q_star == Catch::Approx(w).epsilon(0.15));
    }
}

TEST_CASE("solve_inverse respects state, bounds and direction consistency") {
    const Fixture& f = pitch_fixture();
    const HysteresisModel& m = f.trained.model;

    SECTION("an already-achieved target returns immediately") {
        SolverState state = f.base_state;
        state.q_prev = m.q_min;
        const InverseSolution first = hystkin::solve_inverse(m, state, 15.0);
        REQUIRE(first.converged);
        const InverseSolution second = hystkin::solve_inverse(m, state, 15.0);
        CHECK(second.converged);
        CHECK(second.iterations <= 2);
        CHECK(std::abs(second.q_star - first.q_star) < hystkin::kDirectionDeadband);
    }
    SECTION("unreachable targets return the pinned boundary solution") {
        SolverState state = f.base_state;
        const InverseSolution sol = hystkin::solve_inverse(m, state, 80.0);
        CHECK_FALSE(sol.converged);
        CHECK(sol.q_star >= m.q_min);
        CHECK(sol.q_star <= m.q_max);
        CHECK(sol.q_star == Catch::Approx(m.q_max).margin(1e-6));
        CHECK(state.q_prev == sol.q_star);
    }
    SECTION("branch choice matches the step sign along the whole trace") {
        std::mt19937_64 rng(33);
        std::uniform_real_distribution<double> ug(-43.0, 43.0);
        SolverState state = f.base_state;
        for (int trial = 0; trial < 25; ++trial) {
            const InverseSolution sol = hystkin::solve_inverse(m, state, ug(rng));
            CHECK(sol.q_star >= m.q_min);
            CHECK(sol.q_star <= m.q_max);
            REQUIRE(sol.q_trace.size() == sol.branch_trace.size());
            for (std::size_t i = 1; i < sol.q_trace.size(); ++i) {
                const double step = sol.q_trace[i] - sol.q_trace[i - 1];
                if (step > hystkin::kDirectionDeadband)
                    CHECK(sol.branch_trace[i] == ModelChoice::cw);
                else if (step < -hystkin::kDirectionDeadband)
                    CHECK(sol.branch_trace[i] == ModelChoice::ccw);
                else
                    CHECK(sol.branch_trace[i] == ModelChoice::nominal);
            }
        }
    }
    SECTION("solver state validation") {
        SolverState bad = f.base_state;
        bad.epsilon = 0.0;
        CHECK(kind_of([&] { hystkin::solve_inverse(m, bad, 1.0); }) == ErrorKind::bad_config);
        SolverState nan_target = f.base_state;
        CHECK(kind_of([&] { hystkin::solve_inverse(m, nan_target, std::nan("")); }) ==
              ErrorKind::non_finite_target);
    }
}

TEST_CASE("evaluate compares nominal and compensated predictions") {
    SECTION("identical models make compensation a no-op") {
        const Fixture& f = yaw_fixture();
        HysteresisModel flat;
        flat.nominal = f.trained.model.nominal;
        flat.cw = f.trained.model.nominal;
        flat.ccw = f.trained.model.nominal;
        flat.q_min = f.trained.model.q_min;
        flat.q_max = f.trained.model.q_max;
        BacklashPlant plant = hystkin::make_preset_plant("yaw-like", 0.15, 77);
        const CycleDataset test = hystkin::generate_dataset(plant, 2, 50, 1.0);
        const hystkin::EvaluationReport r = hystkin::evaluate(flat, test);
        CHECK(r.rmse_nominal == r.rmse_compensated);
        CHECK(r.improvement_pct == 0.0);
    }
    SECTION("noise-free plant with a matched model is nearly exact") {
        // Narrow loop: the reversal corners span less than one protocol step,
        // so the regression floor sits well below the tolerance.
        const double w = 0.01;
        BacklashPlant plant(w, hystkin::calibrated_gain(w), 0.0, 11);
        const CycleDataset all = hystkin::generate_dataset(plant, 9, 200, 1.0);
        const auto [train, test] = hystkin::train_test_split(all, 6);
        const auto trained = hystkin::train_hysteresis_model(train, 12, 12, 12, 11);
        const hystkin::EvaluationReport r = hystkin::evaluate(trained.model, test);
        CHECK(r.rmse_compensated < 0.05);
        CHECK(r.rmse_compensated < r.rmse_nominal);
    }
    SECTION("compensation dominates the nominal model on a wide loop") {
        const Fixture& f = yaw_fixture();
        BacklashPlant plant = hystkin::make_preset_plant("yaw-like", 0.15, 1234);
        const CycleDataset test = hystkin::generate_dataset(plant, 3, 200, 1.0);
        const hystkin::EvaluationReport r = hystkin::evaluate(f.trained.model, test);
        CHECK(r.rmse_compensated < r.rmse_nominal);
        CHECK(r.improvement_pct > 0.0);
        CHECK(r.per_sample.size() == test.samples.size());
    }
    SECTION("empty test set is rejected") {
        const Fixture& f = yaw_fixture();
        CycleDataset empty;
        CHECK(kind_of([&] { hystkin::evaluate(f.trained.model, empty); }) == ErrorKind::bad_config);
    }
}

TEST_CASE("round trip property over sampled reachable targets") {
    // Tolerance epsilon + 3 sigma of the training noise.
    const Fixture& f = pitch_fixture();
    const HysteresisModel& m = f.trained.model;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> ug(-44.0, 44.0);
    int hits = 0;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
        const double target = ug(rng);
        SolverState state = f.base_state;
        state.q_prev = (i % 2 == 0) ? m.q_min : m.q_max;
        const InverseSolution sol = hystkin::solve_inverse(m, state, target);
        if (!sol.converged) continue;
        const int approach = (i % 2 == 0) ? +1 : -1;
        const double gamma = plant_landing(f.preset, sol.q_star, approach);
        if (std::abs(gamma - target) < f.base_state.epsilon + 3.0 * f.noise_sigma) ++hits;
    }
    CHECK(hits >= static_cast<int>(0.95 * n));
}
