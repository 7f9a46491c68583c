#pragma once

#include "mdae/common.hpp"

#include <functional>
#include <vector>

namespace mdae {

enum class ScheduleKind { Cosine, Linear };

/// Cumulative signal coefficients. alpha_bar(0) == 1 by definition;
/// alpha_bar(t) for t in [1, T] is strictly decreasing toward ~0.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Cosine;
    int T = 1000;
    std::vector<double> alpha_bar; // size T + 1, index 0 is the boundary value 1

    double at(int t) const {
        if (t < 0 || t > T) throw Error("schedule: step out of range");
        return alpha_bar[static_cast<std::size_t>(t)];
    }
};

NoiseSchedule make_schedule(ScheduleKind kind, int T);

/// The pluggable x0-predicting network m(x_t, t, z).
using DenoiserFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x_t, int t,
                                                 const Eigen::VectorXd& z)>;

/// x_t = sqrt(a_t) x0 + sqrt(1 - a_t) eps.
Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                         const NoiseSchedule& sched);

/// eps = (x_t - sqrt(a_t) x0_hat) / sqrt(1 - a_t); requires a_t < 1.
Eigen::MatrixXd eps_from_x0(const Eigen::MatrixXd& x_t, const Eigen::MatrixXd& x0_hat,
                            int t, const NoiseSchedule& sched);

enum class ReverseMode { Deterministic, Stochastic };

/// One reverse step t -> t_prev. Deterministic mode substitutes the implied
/// noise (DDIM eta = 0); stochastic mode draws fresh Gaussian noise.
Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& x_t, int t, int t_prev,
                             const Eigen::VectorXd& z, const DenoiserFn& denoiser,
                             const NoiseSchedule& sched, ReverseMode mode, Rng& rng);

/// Evenly strided substep sequence 0 = t_0 < t_1 < ... < t_steps = T.
std::vector<int> stride_steps(const NoiseSchedule& sched, int steps);

/// Full reverse chain from x_T down to x0_hat over `steps` strided substeps.
Eigen::MatrixXd decode(const Eigen::MatrixXd& x_T, const Eigen::VectorXd& z,
                       const DenoiserFn& denoiser, const NoiseSchedule& sched, int steps,
                       ReverseMode mode, Rng& rng);

/// Deterministic DDIM inversion x0 -> x_T over the same strided substeps.
Eigen::MatrixXd stochastic_encode(const Eigen::MatrixXd& x0, const Eigen::VectorXd& z,
                                  const DenoiserFn& denoiser, const NoiseSchedule& sched,
                                  int steps);

Eigen::MatrixXd gaussian_noise(int rows, int cols, Rng& rng);

} // namespace mdae
