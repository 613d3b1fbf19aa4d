#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "hystkin/dataset.hpp"
#include "hystkin/errors.hpp"

namespace hystkin {

// Cubic saturating gain curve gamma = a*z + b*z^3, strictly increasing for
// a, b >= 0. The preset calibration picks b so the output spans +/-45
// degrees at the extreme play-operator states.
struct GainCurve {
    double a = 40.0;
    double b = 0.0;

    double operator()(double z) const { return a * z + b * z * z * z; }
    double slope(double z) const { return a + 3.0 * b * z * z; }

    // Inverse by bisection; the curve is strictly increasing.
    double inverse(double gamma, double z_lo, double z_hi, double tol = 1e-12) const {
        if (gamma < (*this)(z_lo) || gamma > (*this)(z_hi))
            raise(ErrorKind::unreachable, "angle " + std::to_string(gamma) + " outside gain range");
        double lo = z_lo;
        double hi = z_hi;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) < gamma)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }
};

// Synthetic hysteretic plant: a play (backlash) operator of width w feeding
// the gain curve, plus seeded Gaussian measurement noise. Ground-truth
// oracle for the inverse-kinematics round trips; branch inverses are
// analytic.
class BacklashPlant {
public:
    BacklashPlant(double width, GainCurve gain, double noise_sigma, std::uint64_t seed,
                  double q_min = -1.0, double q_max = 1.0)
        : width_(width),
          gain_(gain),
          noise_sigma_(noise_sigma),
          q_min_(q_min),
          q_max_(q_max),
          rng_(seed),
          seed_(seed) {
        if (width_ < 0.0) raise(ErrorKind::bad_config, "backlash width must be non-negative");
        if (noise_sigma_ < 0.0) raise(ErrorKind::bad_config, "noise sigma must be non-negative");
        if (!(q_min_ < q_max_)) raise(ErrorKind::bad_config, "q_min must be below q_max");
        for (int i = 0; i <= 100; ++i) {
            const double z = q_min_ - width_ / 2.0 +
                             (q_max_ - q_min_ + width_) * static_cast<double>(i) / 100.0;
            if (!(gain_.slope(z) > 0.0))
                raise(ErrorKind::bad_config, "gain curve is not strictly increasing");
        }
    }

    double width() const { return width_; }
    double noise_sigma() const { return noise_sigma_; }
    double q_min() const { return q_min_; }
    double q_max() const { return q_max_; }
    const GainCurve& gain() const { return gain_; }
    double state() const { return state_z_; }
    std::uint64_t seed() const { return seed_; }

    // Independent copy for parallel generation; plant state resets.
    BacklashPlant fork(std::uint64_t seed) const {
        return BacklashPlant(width_, gain_, noise_sigma_, seed, q_min_, q_max_);
    }

    // Drives the play operator one step and measures the angle.
    double step(double q) {
        if (q < q_min_ || q > q_max_)
            raise(ErrorKind::out_of_bounds, "input " + std::to_string(q) + " outside [" +
                                                std::to_string(q_min_) + ", " + std::to_string(q_max_) + "]");
        state_z_ = std::clamp(state_z_, q - width_ / 2.0, q + width_ / 2.0);
        double gamma = gain_(state_z_);
        if (noise_sigma_ > 0.0) gamma += noise_sigma_ * gauss();
        return gamma;
    }

    // Exact branch inverse, ignoring noise: the contact state on the
    // ascending branch sits at q - w/2 and on the descending one at q + w/2.
    double analytic_inverse(double gamma_des, BranchLabel direction) const {
        const double offset = (direction == BranchLabel::ascending ? width_ / 2.0 : -width_ / 2.0);
        const double z = gain_.inverse(gamma_des, q_min_ - width_, q_max_ + width_);
        const double q = z + offset;
        if (q < q_min_ || q > q_max_)
            raise(ErrorKind::unreachable, "angle " + std::to_string(gamma_des) +
                                              " not reachable on this branch within input bounds");
        return q;
    }

    // Noise-free branch values at a given input, assuming full contact.
    double ascending_value(double q) const { return gain_(q - width_ / 2.0); }
    double descending_value(double q) const { return gain_(q + width_ / 2.0); }

private:
    double gauss() {
        // Marsaglia polar method on raw 53-bit uniforms; keeps the noise
        // stream independent of the standard library's distributions.
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    double width_;
    GainCurve gain_;
    double noise_sigma_;
    double q_min_;
    double q_max_;
    double state_z_ = 0.0;  // play-operator state, |state - q| <= w/2 after each step
    std::mt19937_64 rng_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Presets mirror the observation that pitch shows a wider loop than yaw.
// The widths are artifact choices; the gain is calibrated so the output
// spans +/-45 degrees over the full sweep.
inline GainCurve calibrated_gain(double width, double a = 40.0, double span_deg = 45.0) {
    const double edge = 1.0 - width / 2.0;
    if (!(edge > 0.0)) raise(ErrorKind::bad_config, "backlash width too large for the unit range");
    const double b = (span_deg - a * edge) / (edge * edge * edge);
    if (b < 0.0) raise(ErrorKind::bad_config, "span too small for the linear gain term");
    return GainCurve{a, b};
}

inline double preset_width(const std::string& name) {
    if (name == "yaw-like") return 0.04;
    if (name == "pitch-like") return 0.12;
    raise(ErrorKind::bad_config, "unknown preset '" + name + "' (expected yaw-like or pitch-like)");
}

inline BacklashPlant make_preset_plant(const std::string& name, double noise_sigma,
                                       std::uint64_t seed) {
    const double w = preset_width(name);
    return BacklashPlant(w, calibrated_gain(w), noise_sigma, seed);
}

// Protocol generator: each cycle sweeps q linearly from -amplitude to
// +amplitude in N/2 steps and back in N/2 steps; plant state persists across
// cycles. With warm_up set, one unrecorded step to -amplitude brings the
// plant onto the steady loop before cycle 0.
inline CycleDataset generate_dataset(BacklashPlant& plant, int cycles, int steps_per_cycle,
                                     double amplitude, bool warm_up = true) {
    if (cycles < 1) raise(ErrorKind::bad_config, "need at least one cycle");
    if (steps_per_cycle < 4 || steps_per_cycle % 2 != 0)
        raise(ErrorKind::bad_config, "steps per cycle must be even and at least 4");
    if (amplitude <= 0.0 || -amplitude < plant.q_min() || amplitude > plant.q_max())
        raise(ErrorKind::bad_config, "amplitude outside plant input bounds");

    CycleDataset ds;
    ds.cycles = cycles;
    ds.points_per_cycle = steps_per_cycle;
    ds.q_min = plant.q_min();
    ds.q_max = plant.q_max();
    ds.samples.reserve(static_cast<std::size_t>(cycles) * static_cast<std::size_t>(steps_per_cycle));

    const int half = steps_per_cycle / 2;
    if (warm_up) plant.step(-amplitude);
    for (int c = 0; c < cycles; ++c) {
        for (int s = 0; s < steps_per_cycle; ++s) {
            const double q =
                s < half ? -amplitude + 2.0 * amplitude * static_cast<double>(s + 1) / half
                         : amplitude - 2.0 * amplitude * static_cast<double>(s - half + 1) / half;
            ds.samples.push_back(Sample{q, plant.step(q), c, s});
        }
    }
    return ds;
}

}  // namespace hystkin
