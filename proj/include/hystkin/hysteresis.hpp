#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hystkin/dataset.hpp"
#include "hystkin/errors.hpp"
#include "hystkin/gmm.hpp"
#include "hystkin/gmr.hpp"

namespace hystkin {

// Step direction below which movement counts as "no motion" and the nominal
// model is used.
inline constexpr double kDirectionDeadband = 1e-4;

enum class ModelChoice { nominal, cw, ccw };

// The three-curve kinematics model: a direction-agnostic nominal regression
// plus one regression per motion direction, sharing the input bounds.
struct HysteresisModel {
    GmrModel nominal;
    GmrModel cw;   // ascending branch
    GmrModel ccw;  // descending branch
    double q_min = -1.0;
    double q_max = 1.0;
    int k_nominal = 0;
    int k_cw = 0;
    int k_ccw = 0;

    const GmrModel& model_for(ModelChoice c) const {
        switch (c) {
            case ModelChoice::cw: return cw;
            case ModelChoice::ccw: return ccw;
            case ModelChoice::nominal: break;
        }
        return nominal;
    }
};

struct TrainingResult {
    HysteresisModel model;
    FitReport nominal_report;
    FitReport cw_report;
    FitReport ccw_report;
};

// Mutable per-controller solver state. q_prev persists across solve calls;
// last_direction tracks the physical approach direction of the previous
// command so a repeated target starts converged.
struct SolverState {
    double q_prev = 0.0;
    int last_direction = 0;  // -1 descending, 0 unknown/home, +1 ascending
    double epsilon = 0.05;   // degrees
    int max_iters = 200;
    double alpha_0 = 0.025;  // step scale; see default_solver_state
    double armijo_c = 1e-4;
    double armijo_beta = 0.5;
};

struct InverseSolution {
    double q_star = 0.0;
    double gamma_achieved = 0.0;
    int iterations = 0;
    std::vector<ModelChoice> branch_trace;
    std::vector<double> q_trace;  // iterate per branch_trace entry
    bool converged = false;
};

struct ArmijoResult {
    double alpha = 0.0;
    bool failed = false;
};

namespace detail {

inline void check_solver_state(const SolverState& s) {
    if (!(s.epsilon > 0.0)) raise(ErrorKind::bad_config, "epsilon must be positive");
    if (!(s.alpha_0 > 0.0)) raise(ErrorKind::bad_config, "alpha_0 must be positive");
    if (!(s.armijo_beta > 0.0 && s.armijo_beta < 1.0))
        raise(ErrorKind::bad_config, "armijo_beta must lie in (0, 1)");
    if (!(s.armijo_c > 0.0 && s.armijo_c < 1.0))
        raise(ErrorKind::bad_config, "armijo_c must lie in (0, 1)");
    if (s.max_iters < 1) raise(ErrorKind::bad_config, "max_iters must be positive");
}

}  // namespace detail

// Fits the nominal model on the whole training set and one model per branch
// on the split clusters.
inline TrainingResult train_hysteresis_model(const CycleDataset& train, int k_nominal, int k_cw,
                                             int k_ccw, std::uint64_t seed,
                                             const EmOptions& opts = {}) {
    if (train.cycles < 2)
        raise(ErrorKind::invalid_split,
              "training needs at least 2 cycles, got " + std::to_string(train.cycles));
    const BranchSplit split = split_cycles(train);
    if (static_cast<int>(split.ascending.size()) < k_cw)
        raise(ErrorKind::empty_branch, "ascending branch has " + std::to_string(split.ascending.size()) +
                                           " points, fewer than K=" + std::to_string(k_cw));
    if (static_cast<int>(split.descending.size()) < k_ccw)
        raise(ErrorKind::empty_branch, "descending branch has " + std::to_string(split.descending.size()) +
                                           " points, fewer than K=" + std::to_string(k_ccw));

    const auto input_range = [](const std::vector<Sample>& samples) {
        double lo = samples.front().q;
        double hi = samples.front().q;
        for (const Sample& s : samples) {
            lo = std::min(lo, s.q);
            hi = std::max(hi, s.q);
        }
        return std::pair{lo, hi};
    };

    TrainingResult out;
    auto [gm_n, rep_n] = fit_em(to_matrix(train.samples), k_nominal, seed, opts);
    auto [gm_cw, rep_cw] = fit_em(to_matrix(split.ascending), k_cw, seed, opts);
    auto [gm_ccw, rep_ccw] = fit_em(to_matrix(split.descending), k_ccw, seed, opts);
    const auto [n_lo, n_hi] = input_range(train.samples);
    const auto [cw_lo, cw_hi] = input_range(split.ascending);
    const auto [ccw_lo, ccw_hi] = input_range(split.descending);
    out.model.nominal = make_gmr_model(std::move(gm_n), n_lo, n_hi);
    out.model.cw = make_gmr_model(std::move(gm_cw), cw_lo, cw_hi);
    out.model.ccw = make_gmr_model(std::move(gm_ccw), ccw_lo, ccw_hi);
    out.model.q_min = train.q_min;
    out.model.q_max = train.q_max;
    out.model.k_nominal = k_nominal;
    out.model.k_cw = k_cw;
    out.model.k_ccw = k_ccw;
    out.nominal_report = std::move(rep_n);
    out.cw_report = std::move(rep_cw);
    out.ccw_report = std::move(rep_ccw);
    return out;
}

// Direction-aware forward prediction: ascending motion uses the cw model,
// descending the ccw model, no motion the nominal one.
inline Prediction predict_directional(const HysteresisModel& model, double q, double q_prev) {
    if (!std::isfinite(q) || !std::isfinite(q_prev))
        raise(ErrorKind::non_finite_input, "directional prediction needs finite inputs");
    if (q > q_prev + kDirectionDeadband) return predict(model.cw, q);
    if (q < q_prev - kDirectionDeadband) return predict(model.ccw, q);
    return predict(model.nominal, q);
}

// Backtracking line search: the largest alpha in {alpha_0 * beta^n, n=0..30}
// giving sufficient decrease against the finite-difference slope estimate.
// Returns alpha = 0 with the failure flag set when no candidate qualifies.
template <typename Objective>
ArmijoResult armijo_step(Objective&& objective_at, double q, double direction, double alpha_0,
                         double c, double beta) {
    if (direction == 0.0 || !(alpha_0 > 0.0))
        raise(ErrorKind::bad_config, "line search needs a non-zero direction and positive alpha_0");
    constexpr double kProbe = 1e-5;
    const double here = objective_at(q);
    const double unit = direction > 0.0 ? 1.0 : -1.0;
    // Decrease rate of the cost along the direction of travel, per unit q.
    const double slope_estimate = (here - objective_at(q + kProbe * unit)) / kProbe;
    double alpha = alpha_0;
    for (int n = 0; n <= 30; ++n, alpha *= beta) {
        const double trial = objective_at(q + alpha * direction);
        if (trial <= here - c * alpha * std::abs(direction) * slope_estimate) return {alpha, false};
    }
    return {0.0, true};
}

namespace detail {

struct FixedPointResult {
    double q = 0.0;
    double gamma = 0.0;
    int iterations = 0;
    bool converged = false;
    bool pinned = false;  // stopped on an input bound
};

// Map orientation over a tenth of the input range. Small-scale fitting
// wiggles must not flip the update direction, so the window is deliberately
// wide; a genuinely decreasing map still reads negative.
inline double orientation_slope(const GmrModel& model, double q, double q_min, double q_max) {
    const double h = 0.1 * (q_max - q_min);
    const double lo = std::max(q - h, q_min);
    const double hi = std::min(q + h, q_max);
    if (hi - lo < 1e-12) return 1.0;
    return (predict(model, hi).mean - predict(model, lo).mean) / (hi - lo);
}

// Damped fixed-point iteration q <- q + alpha (gamma_des - prediction) on a
// single regression model, clamped to the input bounds.
inline FixedPointResult iterate_fixed_model(const GmrModel& model, double q_start, double gamma_des,
                                            const SolverState& s, double q_min, double q_max) {
    FixedPointResult r;
    r.q = std::clamp(q_start, q_min, q_max);
    r.gamma = predict(model, r.q).mean;
    for (int it = 0; it < s.max_iters; ++it) {
        if (std::abs(gamma_des - r.gamma) < s.epsilon) {
            r.converged = true;
            break;
        }
        double d = gamma_des - r.gamma;
        if (orientation_slope(model, r.q, q_min, q_max) < 0.0) d = -d;  // decreasing-map safeguard
        const auto obj = [&](double qq) {
            const double e = gamma_des - predict(model, qq).mean;
            return 0.5 * e * e;
        };
        const ArmijoResult ar = armijo_step(obj, r.q, d, s.alpha_0, s.armijo_c, s.armijo_beta);
        // On stagnation take one undamped hop: regression wiggles can carve
        // shallow non-descent pockets that backtracking cannot cross.
        const double alpha = ar.failed ? s.alpha_0 : ar.alpha;
        const double next = std::clamp(r.q + alpha * d, q_min, q_max);
        r.iterations = it + 1;
        if (std::abs(next - r.q) < 1e-15) break;  // progress eaten by the bound clamp
        r.q = next;
        r.gamma = predict(model, r.q).mean;
    }
    r.pinned = r.q <= q_min + 1e-12 || r.q >= q_max - 1e-12;
    return r;
}

inline ModelChoice direction_choice(double delta) {
    if (delta > kDirectionDeadband) return ModelChoice::cw;
    if (delta < -kDirectionDeadband) return ModelChoice::ccw;
    return ModelChoice::nominal;
}

}  // namespace detail

// Solves the nominal model for the input producing gamma_des, starting from
// the last commanded input. Does not modify the state.
inline double nominal_inverse(const HysteresisModel& model, double gamma_des,
                              const SolverState& state) {
    if (!std::isfinite(gamma_des)) raise(ErrorKind::non_finite_target, "target angle is not finite");
    detail::check_solver_state(state);
    const detail::FixedPointResult r = detail::iterate_fixed_model(
        model.nominal, state.q_prev, gamma_des, state, model.q_min, model.q_max);
    if (!r.converged && r.pinned)
        raise(ErrorKind::unreachable, "target " + std::to_string(gamma_des) +
                                          " deg stagnates at the input bound q=" + std::to_string(r.q));
    return r.q;
}

// Branch-switching iterative inverse kinematics with Armijo step control.
//
// The iterate starts from the nominal-model solution; at every step the
// forward estimate comes from the cw model when the last movement was
// ascending and from the ccw model when descending, with the nominal model
// inside the deadband. Unreachable targets return the boundary solution with
// converged = false. On return the state carries q_star and the approach
// direction, so re-solving the same target starts converged.
inline InverseSolution solve_inverse(const HysteresisModel& model, SolverState& state,
                                     double gamma_des) {
    if (!std::isfinite(gamma_des)) raise(ErrorKind::non_finite_target, "target angle is not finite");
    detail::check_solver_state(state);

    const double q_anchor = state.q_prev;
    InverseSolution sol;

    // Already at the target under the current contact state: stay put.
    {
        const ModelChoice hold = state.last_direction > 0   ? ModelChoice::cw
                                 : state.last_direction < 0 ? ModelChoice::ccw
                                                            : ModelChoice::nominal;
        const double gamma_hold = predict(model.model_for(hold), q_anchor).mean;
        if (std::abs(gamma_des - gamma_hold) < state.epsilon) {
            sol.q_star = q_anchor;
            sol.gamma_achieved = gamma_hold;
            sol.converged = true;
            sol.branch_trace.push_back(hold);
            sol.q_trace.push_back(q_anchor);
            return sol;
        }
    }

    // Nominal initialization (best-effort; the branch loop below refines it).
    double q = detail::iterate_fixed_model(model.nominal, q_anchor, gamma_des, state, model.q_min,
                                           model.q_max)
                   .q;
    double q_last = q_anchor;
    double alpha_0 = state.alpha_0;
    int last_step_sign = 0;
    double gamma_hat = 0.0;

    for (int it = 0;; ++it) {
        const ModelChoice mc = detail::direction_choice(q - q_last);
        gamma_hat = predict(model.model_for(mc), q).mean;
        sol.branch_trace.push_back(mc);
        sol.q_trace.push_back(q);
        sol.iterations = it;
        if (std::abs(gamma_des - gamma_hat) < state.epsilon) {
            sol.converged = true;
            break;
        }
        if (it >= state.max_iters) break;

        double d = gamma_des - gamma_hat;
        ModelChoice step_mc = d > 0.0 ? ModelChoice::cw : ModelChoice::ccw;
        const GmrModel* step_model = &model.model_for(step_mc);
        if (detail::orientation_slope(*step_model, q, model.q_min, model.q_max) < 0.0) {
            d = -d;
            step_mc = d > 0.0 ? ModelChoice::cw : ModelChoice::ccw;
            step_model = &model.model_for(step_mc);
        }
        // A sign reversal of the step means the previous step overshot the
        // target; shrink the step scale so the iterates stop hopping between
        // the two branch curves.
        const int step_sign = d > 0.0 ? 1 : -1;
        if (last_step_sign != 0 && step_sign != last_step_sign)
            alpha_0 = std::max(alpha_0 * 0.5, state.alpha_0 / 64.0);
        last_step_sign = step_sign;

        const auto obj = [&](double qq) {
            const double e = gamma_des - predict(*step_model, qq).mean;
            return 0.5 * e * e;
        };
        const ArmijoResult ar = armijo_step(obj, q, d, alpha_0, state.armijo_c, state.armijo_beta);
        // Same stagnation escape as the fixed-model iteration.
        const double alpha = ar.failed ? alpha_0 : ar.alpha;
        const double next = std::clamp(q + alpha * d, model.q_min, model.q_max);
        if (std::abs(next - q) < 1e-15) break;  // pinned at a bound
        q_last = q;
        q = next;
    }

    sol.q_star = q;
    sol.gamma_achieved = gamma_hat;
    state.q_prev = sol.q_star;
    if (std::abs(sol.q_star - q_anchor) > kDirectionDeadband)
        state.last_direction = sol.q_star > q_anchor ? 1 : -1;
    return sol;
}

// alpha_0 = 1 / (1.1 * max |slope|) over a 101-point grid of all three
// models, so a full step never overshoots by more than the local/global
// slope mismatch.
inline SolverState default_solver_state(const HysteresisModel& model) {
    SolverState s;
    double steepest = 0.0;
    for (const ModelChoice mc : {ModelChoice::nominal, ModelChoice::cw, ModelChoice::ccw}) {
        const GmrModel& m = model.model_for(mc);
        for (int i = 0; i <= 100; ++i) {
            const double q =
                model.q_min + (model.q_max - model.q_min) * static_cast<double>(i) / 100.0;
            steepest = std::max(steepest, std::abs(local_slope(m, q)));
        }
    }
    if (steepest > 0.0) s.alpha_0 = 1.0 / (1.1 * steepest);
    return s;
}

struct SampleError {
    int cycle_id = 0;
    int step_index = 0;
    double q = 0.0;
    int direction = 0;  // sign of the recorded step, 0 for the first sample
    double gamma = 0.0;
    double predicted_nominal = 0.0;
    double predicted_compensated = 0.0;
};

struct EvaluationReport {
    double rmse_nominal = 0.0;
    double rmse_compensated = 0.0;
    double improvement_pct = 0.0;
    std::vector<SampleError> per_sample;
};

// Open-loop test-phase comparison: the nominal model against the
// direction-aware one, with directions inferred from the recorded input
// sequence itself.
inline EvaluationReport evaluate(const HysteresisModel& model, const CycleDataset& test) {
    if (test.samples.empty()) raise(ErrorKind::bad_config, "test set is empty");
    EvaluationReport report;
    report.per_sample.reserve(test.samples.size());
    double se_nominal = 0.0;
    double se_comp = 0.0;
    double q_prev = test.samples.front().q;  // first sample has no recorded direction
    for (std::size_t j = 0; j < test.samples.size(); ++j) {
        const Sample& s = test.samples[j];
        SampleError row;
        row.cycle_id = s.cycle_id;
        row.step_index = s.step_index;
        row.q = s.q;
        row.gamma = s.gamma;
        row.direction = s.q > q_prev + kDirectionDeadband  ? 1
                        : s.q < q_prev - kDirectionDeadband ? -1
                                                            : 0;
        row.predicted_nominal = predict(model.nominal, s.q).mean;
        row.predicted_compensated = predict_directional(model, s.q, q_prev).mean;
        se_nominal += (row.predicted_nominal - s.gamma) * (row.predicted_nominal - s.gamma);
        se_comp += (row.predicted_compensated - s.gamma) * (row.predicted_compensated - s.gamma);
        report.per_sample.push_back(row);
        q_prev = s.q;
    }
    const double n = static_cast<double>(test.samples.size());
    report.rmse_nominal = std::sqrt(se_nominal / n);
    report.rmse_compensated = std::sqrt(se_comp / n);
    report.improvement_pct =
        report.rmse_nominal > 0.0 ? 100.0 * (1.0 - report.rmse_compensated / report.rmse_nominal)
                                  : 0.0;
    return report;
}

}  // namespace hystkin
