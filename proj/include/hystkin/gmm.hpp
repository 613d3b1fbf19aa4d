#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hystkin/errors.hpp"
#include "hystkin/log.hpp"

namespace hystkin {

// One weighted multivariate normal of the mixture.
struct GaussianComponent {
    double pi = 1.0;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
};

struct GaussianMixture {
    std::vector<GaussianComponent> components;
    int dim = 0;

    int k() const { return static_cast<int>(components.size()); }
};

// EM diagnostics. The log-likelihood trace is in data units, one entry per
// E-step, and is non-decreasing up to 1e-9 slack.
struct FitReport {
    std::vector<double> log_likelihood_trace;
    int iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;

    double final_log_likelihood() const {
        return log_likelihood_trace.empty() ? -std::numeric_limits<double>::infinity()
                                            : log_likelihood_trace.back();
    }
};

struct EmOptions {
    int max_iters = 500;
    double tol = 1e-4;          // per-point log-likelihood improvement
    int kmeans_iters = 20;
    double ridge_scale = 1e-6;  // diagonal ridge, relative to trace/D, every M-step
    double eig_floor = 1e-9;    // eigenvalue floor (standardized units)
};

namespace detail {

constexpr double kLog2Pi = 1.8378770664093454836;

inline double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;  // all -inf (or a NaN surfaced)
    return m + std::log((v.array() - m).exp().sum());
}

// Log-density of N(mu, sigma) via Cholesky; sigma must be positive definite.
class GaussianLogPdf {
public:
    explicit GaussianLogPdf(const GaussianComponent& c) : mu_(c.mu) {
        llt_.compute(c.sigma);
        if (llt_.info() != Eigen::Success)
            raise(ErrorKind::singular_covariance, "covariance is not positive definite");
        const auto& l = llt_.matrixL();
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < c.sigma.rows(); ++i) log_det += std::log(l(i, i));
        log_det *= 2.0;
        log_norm_ = -0.5 * (static_cast<double>(c.sigma.rows()) * kLog2Pi + log_det);
    }

    double operator()(const Eigen::VectorXd& x) const {
        Eigen::VectorXd d = x - mu_;
        llt_.matrixL().solveInPlace(d);
        return log_norm_ - 0.5 * d.squaredNorm();
    }

private:
    Eigen::VectorXd mu_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double log_norm_ = 0.0;
};

// Uniform in [0, 1) from the top 53 bits of the generator, so draws do not
// depend on the standard library's distribution implementation.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void check_point(const GaussianMixture& gm, const Eigen::VectorXd& xi) {
    if (xi.size() != gm.dim)
        raise(ErrorKind::dimension_mismatch, "point has dimension " + std::to_string(xi.size()) +
                                                 ", mixture expects " + std::to_string(gm.dim));
}

inline Eigen::VectorXd component_log_weights(const GaussianMixture& gm, const Eigen::VectorXd& xi) {
    Eigen::VectorXd lw(gm.k());
    for (int k = 0; k < gm.k(); ++k) {
        const GaussianComponent& c = gm.components[static_cast<std::size_t>(k)];
        lw[k] = (c.pi > 0.0 ? std::log(c.pi) + GaussianLogPdf(c)(xi)
                            : -std::numeric_limits<double>::infinity());
    }
    return lw;
}

// Symmetrize, add the relative diagonal ridge, then floor eigenvalues.
inline void regularize_covariance(Eigen::MatrixXd& sigma, const EmOptions& opts) {
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    const double d = static_cast<double>(sigma.rows());
    const double ridge = opts.ridge_scale * sigma.trace() / d;
    if (ridge > 0.0) sigma.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.eigenvalues().minCoeff() < opts.eig_floor) {
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(opts.eig_floor);
        sigma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        sigma = 0.5 * (sigma + sigma.transpose()).eval();
    }
}

// k-means++ seeding followed by a fixed number of Lloyd iterations.
inline Eigen::MatrixXd kmeans(const Eigen::MatrixXd& z, int k, std::mt19937_64& rng,
                              const EmOptions& opts, std::vector<int>& assignment) {
    const Eigen::Index n = z.rows();
    const Eigen::Index d = z.cols();
    Eigen::MatrixXd centers(k, d);

    const auto pick = [&](double r, const Eigen::VectorXd& weights) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            acc += weights[j];
            if (r < acc) return j;
        }
        return n - 1;
    };

    centers.row(0) = z.row(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n)));
    Eigen::VectorXd d2 = (z.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index j;
        if (total > 0.0) {
            j = pick(uniform01(rng) * total, d2);
        } else {
            j = static_cast<Eigen::Index>(c) % n;  // all points coincide with centers
        }
        centers.row(c) = z.row(j);
        d2 = d2.cwiseMin((z.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    assignment.assign(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n));
    for (int it = 0; it < opts.kmeans_iters; ++it) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double bd = std::numeric_limits<double>::infinity();
            int bc = 0;
            for (int c = 0; c < k; ++c) {
                const double dist = (z.row(j) - centers.row(c)).squaredNorm();
                if (dist < bd) {
                    bd = dist;
                    bc = c;
                }
            }
            assignment[static_cast<std::size_t>(j)] = bc;
            best[static_cast<std::size_t>(j)] = bd;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index j = 0; j < n; ++j) {
            sums.row(assignment[static_cast<std::size_t>(j)]) += z.row(j);
            counts[assignment[static_cast<std::size_t>(j)]] += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0.0) {
                centers.row(c) = sums.row(c) / counts[c];
            } else {
                // Re-seed an empty cluster with the worst-covered point.
                Eigen::Index far = 0;
                double fd = -1.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (best[static_cast<std::size_t>(j)] > fd) {
                        fd = best[static_cast<std::size_t>(j)];
                        far = j;
                    }
                }
                centers.row(c) = z.row(far);
                best[static_cast<std::size_t>(far)] = 0.0;
            }
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double dist = (z.row(j) - centers.row(c)).squaredNorm();
            if (dist < bd) {
                bd = dist;
                assignment[static_cast<std::size_t>(j)] = c;
            }
        }
    }
    return centers;
}

}  // namespace detail

// Mixture density at a point (weighted sum of component normals), evaluated in
// the log domain.
inline double density(const GaussianMixture& gm, const Eigen::VectorXd& xi) {
    detail::check_point(gm, xi);
    return std::exp(detail::log_sum_exp(detail::component_log_weights(gm, xi)));
}

inline double log_density(const GaussianMixture& gm, const Eigen::VectorXd& xi) {
    detail::check_point(gm, xi);
    return detail::log_sum_exp(detail::component_log_weights(gm, xi));
}

// Posterior component probabilities for a full data point; entries sum to 1.
inline Eigen::VectorXd responsibilities(const GaussianMixture& gm, const Eigen::VectorXd& xi) {
    detail::check_point(gm, xi);
    if (!xi.allFinite())
        raise(ErrorKind::degenerate_density, "responsibilities of a non-finite point");
    const Eigen::VectorXd lw = detail::component_log_weights(gm, xi);
    const double lse = detail::log_sum_exp(lw);
    if (!std::isfinite(lse))
        raise(ErrorKind::degenerate_density, "all component densities vanished");
    return (lw.array() - lse).exp();
}

// Fits a K-component full-covariance mixture with EM.
//
// The fit is deterministic in (data-as-a-set, K, seed): rows are first
// sorted canonically, then standardized per dimension; seeding, k-means and
// EM all run on that representation. This makes the result invariant to row
// permutations and equivariant under per-dimension affine transforms.
// Covariance regularization (ridge + eigenvalue floor) acts in the
// standardized space, so it scales with the data.
inline std::pair<GaussianMixture, FitReport> fit_em(const Eigen::MatrixXd& data, int k,
                                                    std::uint64_t seed,
                                                    const EmOptions& opts = {}) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (k < 1) raise(ErrorKind::bad_config, "component count must be at least 1");
    if (n < k)
        raise(ErrorKind::too_few_points,
              std::to_string(n) + " points cannot support K=" + std::to_string(k));
    if (!data.allFinite()) raise(ErrorKind::non_finite_input, "training data contains non-finite values");

    // Canonical row order: lexicographic over all dimensions.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (data(a, j) != data(b, j)) return data(a, j) < data(b, j);
        }
        return false;
    });
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = data.row(order[static_cast<std::size_t>(i)]);

    // Per-dimension standardization.
    const Eigen::RowVectorXd center = x.colwise().mean();
    Eigen::RowVectorXd scale(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double var = (x.col(j).array() - center[j]).square().sum() / static_cast<double>(n);
        scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    Eigen::MatrixXd z = (x.rowwise() - center).array().rowwise() / scale.array();
    const double log_scale_shift =
        static_cast<double>(n) * scale.array().log().sum();  // z-space LL -> data-space LL

    std::mt19937_64 rng(seed);
    std::vector<int> assignment;
    const Eigen::MatrixXd centers = detail::kmeans(z, k, rng, opts, assignment);

    // Initial parameters from the k-means clusters.
    std::vector<GaussianComponent> comps(static_cast<std::size_t>(k));
    Eigen::MatrixXd global_cov =
        (z.transpose() * z) / static_cast<double>(n);  // z is centered already
    for (int c = 0; c < k; ++c) {
        GaussianComponent& gc = comps[static_cast<std::size_t>(c)];
        std::vector<Eigen::Index> members;
        for (Eigen::Index j = 0; j < n; ++j)
            if (assignment[static_cast<std::size_t>(j)] == c) members.push_back(j);
        gc.pi = std::max(1.0, static_cast<double>(members.size())) / static_cast<double>(n);
        if (members.empty()) {
            gc.mu = centers.row(c).transpose();
            gc.sigma = global_cov;
        } else {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
            for (Eigen::Index j : members) mean += z.row(j).transpose();
            mean /= static_cast<double>(members.size());
            gc.mu = mean;
            if (members.size() < 2) {
                gc.sigma = global_cov;
            } else {
                Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
                for (Eigen::Index j : members) {
                    const Eigen::VectorXd dv = z.row(j).transpose() - mean;
                    cov += dv * dv.transpose();
                }
                gc.sigma = cov / static_cast<double>(members.size());
            }
        }
        detail::regularize_covariance(gc.sigma, opts);
    }
    {
        double pi_sum = 0.0;
        for (const auto& c : comps) pi_sum += c.pi;
        for (auto& c : comps) c.pi /= pi_sum;
    }

    FitReport report;
    report.seed = seed;
    Eigen::MatrixXd resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        // E-step.
        std::vector<detail::GaussianLogPdf> pdfs;
        pdfs.reserve(static_cast<std::size_t>(k));
        Eigen::VectorXd log_pi(k);
        for (int c = 0; c < k; ++c) {
            pdfs.emplace_back(comps[static_cast<std::size_t>(c)]);
            log_pi[c] = comps[static_cast<std::size_t>(c)].pi > 0.0
                            ? std::log(comps[static_cast<std::size_t>(c)].pi)
                            : -std::numeric_limits<double>::infinity();
        }
        double ll = 0.0;
        Eigen::VectorXd lw(k);
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::VectorXd point = z.row(j).transpose();
            for (int c = 0; c < k; ++c) lw[c] = log_pi[c] + pdfs[static_cast<std::size_t>(c)](point);
            const double lse = detail::log_sum_exp(lw);
            ll += lse;
            resp.row(j) = (lw.array() - lse).exp();
        }
        report.log_likelihood_trace.push_back(ll - log_scale_shift);
        if (iter > 0 && ll - prev_ll < opts.tol * static_cast<double>(n)) {
            report.converged = true;
            break;
        }
        prev_ll = ll;

        // M-step.
        const Eigen::VectorXd nk = resp.colwise().sum();
        for (int c = 0; c < k; ++c) {
            GaussianComponent& gc = comps[static_cast<std::size_t>(c)];
            gc.pi = nk[c] / static_cast<double>(n);
            if (nk[c] < 1e-12) continue;  // vanished component keeps its shape
            const Eigen::VectorXd mean = (resp.col(c).transpose() * z).transpose() / nk[c];
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            for (Eigen::Index j = 0; j < n; ++j) {
                const Eigen::VectorXd dv = z.row(j).transpose() - mean;
                cov += resp(j, c) * (dv * dv.transpose());
            }
            gc.mu = mean;
            gc.sigma = cov / nk[c];
            detail::regularize_covariance(gc.sigma, opts);
        }
        double pi_sum = 0.0;
        for (const auto& c : comps) pi_sum += c.pi;
        for (auto& c : comps) c.pi /= pi_sum;
    }
    report.iterations = static_cast<int>(report.log_likelihood_trace.size());

    // Map parameters back to data units.
    GaussianMixture gm;
    gm.dim = static_cast<int>(d);
    gm.components.reserve(comps.size());
    const Eigen::VectorXd s = scale.transpose();
    for (GaussianComponent& c : comps) {
        GaussianComponent out;
        out.pi = c.pi;
        out.mu = center.transpose() + s.cwiseProduct(c.mu);
        out.sigma = s.asDiagonal() * c.sigma * s.asDiagonal();
        out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
        gm.components.push_back(std::move(out));
    }
    return {std::move(gm), std::move(report)};
}

// p = (K-1) + K*D + K*D(D+1)/2 free parameters; the mixing constraint
// removes one weight.
inline int free_parameter_count(int k, int d) { return (k - 1) + k * d + k * d * (d + 1) / 2; }

// BIC = -2 lnL + p ln(N), AIC = -2 lnL + 2p.
inline std::pair<double, double> information_criteria(const GaussianMixture& gm,
                                                      const Eigen::MatrixXd& data) {
    if (data.rows() == 0) raise(ErrorKind::bad_config, "information criteria need data");
    double ln_l = 0.0;
    for (Eigen::Index j = 0; j < data.rows(); ++j) ln_l += log_density(gm, data.row(j).transpose());
    const double p = free_parameter_count(gm.k(), gm.dim);
    const double bic = -2.0 * ln_l + p * std::log(static_cast<double>(data.rows()));
    const double aic = -2.0 * ln_l + 2.0 * p;
    return {bic, aic};
}

struct KCriteria {
    int k = 0;
    double bic = 0.0;
    double aic = 0.0;
};

struct SelectKResult {
    int best_k_bic = 0;
    int best_k_aic = 0;
    std::vector<KCriteria> table;  // only the Ks that fitted successfully
};

// Sweeps K over [k_min, k_max], fitting each with the same seed, and picks
// the BIC/AIC minimizers. A K whose fit fails is skipped, not fatal.
inline SelectKResult select_k(const Eigen::MatrixXd& data, int k_min, int k_max,
                              std::uint64_t seed, const EmOptions& opts = {}) {
    if (k_min < 1 || k_min > k_max)
        raise(ErrorKind::bad_config, "bad K range [" + std::to_string(k_min) + ", " +
                                         std::to_string(k_max) + "]");
    if (static_cast<Eigen::Index>(k_max) > data.rows() / 10)
        raise(ErrorKind::bad_config, "k_max exceeds N/10 = " + std::to_string(data.rows() / 10));
    SelectKResult result;
    double best_bic = std::numeric_limits<double>::infinity();
    double best_aic = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        try {
            const auto [gm, report] = fit_em(data, k, seed, opts);
            const auto [bic, aic] = information_criteria(gm, data);
            result.table.push_back({k, bic, aic});
            if (bic < best_bic) {
                best_bic = bic;
                result.best_k_bic = k;
            }
            if (aic < best_aic) {
                best_aic = aic;
                result.best_k_aic = k;
            }
        } catch (const Error& e) {
            log::warn("select_k: K=" + std::to_string(k) + " failed: " + e.what());
        }
    }
    if (result.table.empty()) raise(ErrorKind::too_few_points, "no K in range could be fitted");
    return result;
}

}  // namespace hystkin
