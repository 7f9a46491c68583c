#include "mdae/diffusion.hpp"

#include <cmath>

namespace mdae {

NoiseSchedule make_schedule(ScheduleKind kind, int T) {
    if (T < 2) throw Error("make_schedule: T must be >= 2");
    NoiseSchedule sched;
    sched.kind = kind;
    sched.T = T;
    sched.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
    sched.alpha_bar[0] = 1.0;
    if (kind == ScheduleKind::Cosine) {
        // Squared-cosine profile with the customary small offset.
        const double s = 0.008;
        auto f = [&](double t) {
            const double x = (t / T + s) / (1.0 + s) * M_PI / 2.0;
            const double c = std::cos(x);
            return c * c;
        };
        const double f0 = f(0.0);
        for (int t = 1; t <= T; ++t) {
            sched.alpha_bar[static_cast<std::size_t>(t)] = f(static_cast<double>(t)) / f0;
        }
    } else {
        // Noise variance 1 - alpha_bar grows linearly in t.
        const double end = 1e-4;
        for (int t = 1; t <= T; ++t) {
            sched.alpha_bar[static_cast<std::size_t>(t)] =
                1.0 - (1.0 - end) * static_cast<double>(t) / T;
        }
    }
    for (int t = 1; t <= T; ++t) {
        if (!(sched.alpha_bar[static_cast<std::size_t>(t)] <
              sched.alpha_bar[static_cast<std::size_t>(t - 1)])) {
            throw Error("make_schedule: alpha_bar not strictly decreasing");
        }
        if (!(sched.alpha_bar[static_cast<std::size_t>(t)] > 0.0)) {
            throw Error("make_schedule: alpha_bar must stay positive");
        }
    }
    return sched;
}

Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                         const NoiseSchedule& sched) {
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
        throw Error("q_sample: shape mismatch");
    }
    const double a = sched.at(t);
    return std::sqrt(a) * x0 + std::sqrt(1.0 - a) * eps;
}

Eigen::MatrixXd eps_from_x0(const Eigen::MatrixXd& x_t, const Eigen::MatrixXd& x0_hat,
                            int t, const NoiseSchedule& sched) {
    if (x_t.rows() != x0_hat.rows() || x_t.cols() != x0_hat.cols()) {
        throw Error("eps_from_x0: shape mismatch");
    }
    const double a = sched.at(t);
    if (a >= 1.0) throw Error("eps_from_x0: alpha_bar is 1, noise undefined");
    return (x_t - std::sqrt(a) * x0_hat) / std::sqrt(1.0 - a);
}

Eigen::MatrixXd gaussian_noise(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd eps(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) eps(i, j) = normal(rng);
    }
    return eps;
}

Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& x_t, int t, int t_prev,
                             const Eigen::VectorXd& z, const DenoiserFn& denoiser,
                             const NoiseSchedule& sched, ReverseMode mode, Rng& rng) {
    if (t < 1 || t > sched.T || t_prev < 0 || t_prev >= t) {
        throw Error("reverse_step: step out of range");
    }
    const Eigen::MatrixXd x0_hat = denoiser(x_t, t, z);
    Eigen::MatrixXd eps;
    if (mode == ReverseMode::Stochastic) {
        eps = gaussian_noise(static_cast<int>(x_t.rows()), static_cast<int>(x_t.cols()), rng);
    } else {
        eps = eps_from_x0(x_t, x0_hat, t, sched);
    }
    const double a_prev = sched.at(t_prev);
    return std::sqrt(a_prev) * x0_hat + std::sqrt(1.0 - a_prev) * eps;
}

std::vector<int> stride_steps(const NoiseSchedule& sched, int steps) {
    if (steps < 1 || steps > sched.T) {
        throw Error("stride_steps: substep count must be in [1, T]");
    }
    std::vector<int> ts(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
        ts[static_cast<std::size_t>(i)] =
            static_cast<int>(std::llround(static_cast<double>(i) * sched.T / steps));
    }
    return ts;
}

Eigen::MatrixXd decode(const Eigen::MatrixXd& x_T, const Eigen::VectorXd& z,
                       const DenoiserFn& denoiser, const NoiseSchedule& sched, int steps,
                       ReverseMode mode, Rng& rng) {
    const std::vector<int> ts = stride_steps(sched, steps);
    Eigen::MatrixXd x = x_T;
    for (int i = steps; i >= 1; --i) {
        x = reverse_step(x, ts[static_cast<std::size_t>(i)],
                         ts[static_cast<std::size_t>(i - 1)], z, denoiser, sched, mode,
                         rng);
    }
    return x;
}

Eigen::MatrixXd stochastic_encode(const Eigen::MatrixXd& x0, const Eigen::VectorXd& z,
                                  const DenoiserFn& denoiser, const NoiseSchedule& sched,
                                  int steps) {
    const std::vector<int> ts = stride_steps(sched, steps);
    Eigen::MatrixXd x = x0;
    for (int i = 1; i <= steps; ++i) {
        const int t_prev = ts[static_cast<std::size_t>(i - 1)];
        const int t = ts[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd x0_hat = denoiser(x, t_prev, z);
        Eigen::MatrixXd eps;
        if (t_prev == 0) {
            // alpha_bar(0) = 1: x carries no noise yet.
            eps = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        } else {
            eps = eps_from_x0(x, x0_hat, t_prev, sched);
        }
        const double a = sched.at(t);
        x = std::sqrt(a) * x0_hat + std::sqrt(1.0 - a) * eps;
    }
    return x;
}

} // namespace mdae
