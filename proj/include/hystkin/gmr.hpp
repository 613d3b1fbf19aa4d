#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "hystkin/errors.hpp"
#include "hystkin/gmm.hpp"

namespace hystkin {

// Conditional output estimate at one input: the weighted-normal mean and
// variance together with the per-component responsibilities that produced
// them. `extrapolated` is set when the query lies outside the training
// input range.
struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
    Eigen::VectorXd weights;
    bool extrapolated = false;
};

// A trained 2-D mixture plus the input/output block partition used for
// conditioning. Immutable; predict is a pure function.
struct GmrModel {
    GaussianMixture mixture;
    int input_index = 0;
    int output_index = 1;
    double input_min = -std::numeric_limits<double>::infinity();
    double input_max = std::numeric_limits<double>::infinity();

    int k() const { return mixture.k(); }

    double mu_in(int k) const { return mixture.components[static_cast<std::size_t>(k)].mu[input_index]; }
    double mu_out(int k) const { return mixture.components[static_cast<std::size_t>(k)].mu[output_index]; }
    double var_in(int k) const {
        return mixture.components[static_cast<std::size_t>(k)].sigma(input_index, input_index);
    }
    double var_out(int k) const {
        return mixture.components[static_cast<std::size_t>(k)].sigma(output_index, output_index);
    }
    double cov_out_in(int k) const {
        return mixture.components[static_cast<std::size_t>(k)].sigma(output_index, input_index);
    }
    double cov_in_out(int k) const {
        return mixture.components[static_cast<std::size_t>(k)].sigma(input_index, output_index);
    }
};

// Validates the block partition and the per-component input variance.
// input_min/input_max mark the training input range for extrapolation
// flagging; omit them to derive a +/-3 sigma envelope from the mixture.
inline GmrModel make_gmr_model(GaussianMixture mixture, double input_min, double input_max,
                               int input_index = 0, int output_index = 1) {
    if (mixture.dim != 2)
        raise(ErrorKind::dimension_mismatch,
              "regression expects 2-D mixtures, got D=" + std::to_string(mixture.dim));
    if (!((input_index == 0 && output_index == 1) || (input_index == 1 && output_index == 0)))
        raise(ErrorKind::bad_config, "input/output indices must partition {0, 1}");
    GmrModel model{std::move(mixture), input_index, output_index, input_min, input_max};
    for (int k = 0; k < model.k(); ++k) {
        if (!(model.var_in(k) > 0.0))
            raise(ErrorKind::singular_input_variance,
                  "component " + std::to_string(k) + " has non-positive input variance");
    }
    return model;
}

inline GmrModel make_gmr_model(GaussianMixture mixture, int input_index = 0, int output_index = 1) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const GaussianComponent& c : mixture.components) {
        const double m = c.mu[input_index];
        const double s = std::sqrt(std::max(0.0, c.sigma(input_index, input_index)));
        lo = std::min(lo, m - 3.0 * s);
        hi = std::max(hi, m + 3.0 * s);
    }
    return make_gmr_model(std::move(mixture), lo, hi, input_index, output_index);
}

// Gaussian conditioning of component k on the input value: the conditional
// mean is linear in q and the conditional variance is the Schur complement.
inline std::pair<double, double> component_conditional(const GmrModel& model, int k, double q) {
    const double var_in = model.var_in(k);
    if (!(var_in > 0.0))
        raise(ErrorKind::singular_input_variance,
              "component " + std::to_string(k) + " has non-positive input variance");
    const double mean = model.mu_out(k) + model.cov_out_in(k) / var_in * (q - model.mu_in(k));
    const double variance =
        std::max(0.0, model.var_out(k) - model.cov_out_in(k) * model.cov_in_out(k) / var_in);
    return {mean, variance};
}

// h_k: posterior probability of component k given only the input value,
// computed with log-sum-exp on the 1-D input marginals.
inline Eigen::VectorXd input_responsibilities(const GmrModel& model, double q) {
    if (!std::isfinite(q)) raise(ErrorKind::non_finite_input, "input value is not finite");
    const int k = model.k();
    Eigen::VectorXd lw(k);
    for (int i = 0; i < k; ++i) {
        const double pi = model.mixture.components[static_cast<std::size_t>(i)].pi;
        const double var = model.var_in(i);
        const double diff = q - model.mu_in(i);
        lw[i] = (pi > 0.0 ? std::log(pi) : -std::numeric_limits<double>::infinity()) -
                0.5 * (std::log(2.0 * M_PI * var) + diff * diff / var);
    }
    const double lse = detail::log_sum_exp(lw);
    if (!std::isfinite(lse))
        raise(ErrorKind::degenerate_density, "input marginal density vanished everywhere");
    return (lw.array() - lse).exp();
}

// Forward regression: mean = sum h_k m_k(q), variance = sum h_k^2 v_k.
inline Prediction predict(const GmrModel& model, double q) {
    Prediction p;
    p.weights = input_responsibilities(model, q);
    for (int k = 0; k < model.k(); ++k) {
        const auto [mean_k, var_k] = component_conditional(model, k, q);
        p.mean += p.weights[k] * mean_k;
        p.variance += p.weights[k] * p.weights[k] * var_k;
    }
    p.extrapolated = q < model.input_min || q > model.input_max;
    return p;
}

// Central finite-difference slope of the regression mean.
inline double local_slope(const GmrModel& model, double q, double h = 1e-5) {
    return (predict(model, q + h).mean - predict(model, q - h).mean) / (2.0 * h);
}

}  // namespace hystkin
