#include "mdae/diffusion.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace mdae;

namespace {

Eigen::MatrixXd random_tensor(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    return gaussian_noise(rows, cols, rng);
}

} // namespace

TEST_CASE("cosine schedule matches the squared-cosine oracle") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 1000);
    CHECK(s.at(0) == 1.0);
    const auto f = [](double t) {
        const double x = (t / 1000 + 0.008) / 1.008 * M_PI / 2;
        return std::cos(x) * std::cos(x);
    };
    for (int t : {1, 10, 250, 500, 999, 1000}) {
        CHECK(s.at(t) == doctest::Approx(f(t) / f(0)).epsilon(1e-12));
    }
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.at(t) < s.at(t - 1));
        CHECK(s.at(t) > 0.0);
    }
}

TEST_CASE("linear schedule has 1 - alpha_bar linear in t") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Linear, 500);
    CHECK(s.at(0) == 1.0);
    const double slope0 = (1.0 - s.at(1));
    for (int t = 1; t <= 500; ++t) {
        CHECK(1.0 - s.at(t) == doctest::Approx(slope0 * t).epsilon(1e-9));
    }
    CHECK(s.at(500) == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("q_sample and eps_from_x0 are algebraic inverses") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 1000);
    const Eigen::MatrixXd x0 = random_tensor(7, 5, 1);
    for (int t : {1, 50, 500, 1000}) {
        const Eigen::MatrixXd eps = random_tensor(7, 5, 10 + t);
        const Eigen::MatrixXd xt = q_sample(x0, t, eps, s);
        const Eigen::MatrixXd eps_back = eps_from_x0(xt, x0, t, s);
        CHECK((eps_back - eps).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((q_sample(x0, t, eps_back, s) - xt).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK_THROWS_AS((void)eps_from_x0(x0, x0, 0, s), Error);
}

TEST_CASE("stride_steps spans 0..T evenly") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 1000);
    const std::vector<int> steps = stride_steps(s, 10);
    REQUIRE(steps.size() == 11);
    CHECK(steps.front() == 0);
    CHECK(steps.back() == 1000);
    for (std::size_t i = 1; i < steps.size(); ++i) CHECK(steps[i] > steps[i - 1]);
    CHECK(steps[5] == 500);
}

TEST_CASE("oracle denoiser: deterministic decode returns x0 exactly") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
    const Eigen::MatrixXd x0 = random_tensor(4, 6, 2);
    const DenoiserFn oracle = [&](const Eigen::MatrixXd&, int,
                                  const Eigen::VectorXd&) { return x0; };
    Rng rng(0);
    const Eigen::MatrixXd xT = random_tensor(4, 6, 3);
    const Eigen::MatrixXd out =
        decode(xT, Eigen::VectorXd::Zero(2), oracle, s, 10, ReverseMode::Deterministic,
               rng);
    CHECK((out - x0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zero denoiser absorbs to zero") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
    const DenoiserFn zero = [](const Eigen::MatrixXd& x, int, const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Zero(x.rows(), x.cols()).eval();
    };
    Rng rng(0);
    const Eigen::MatrixXd out =
        decode(random_tensor(3, 3, 4), Eigen::VectorXd::Zero(1), zero, s, 100,
               ReverseMode::Deterministic, rng);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stochastic_encode then decode reproduces x0 with an oracle") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 1000);
    const Eigen::MatrixXd x0 = random_tensor(5, 8, 6);
    const DenoiserFn oracle = [&](const Eigen::MatrixXd&, int,
                                  const Eigen::VectorXd&) { return x0; };
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd xT = stochastic_encode(x0, z, oracle, s, 50);
    Rng rng(0);
    const Eigen::MatrixXd back =
        decode(xT, z, oracle, s, 50, ReverseMode::Deterministic, rng);
    CHECK((back - x0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("one deterministic reverse step inverts one inversion step") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
    const Eigen::MatrixXd x0 = random_tensor(3, 4, 7);
    const DenoiserFn oracle = [&](const Eigen::MatrixXd&, int,
                                  const Eigen::VectorXd&) { return x0; };
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
    // Forward one substep via inversion, then reverse it.
    const Eigen::MatrixXd x_lo = q_sample(x0, 40, random_tensor(3, 4, 8), s);
    const Eigen::MatrixXd eps_hat = eps_from_x0(x_lo, x0, 40, s);
    const Eigen::MatrixXd x_hi = q_sample(x0, 60, eps_hat, s);
    Rng rng(0);
    const Eigen::MatrixXd back =
        reverse_step(x_hi, 60, 40, z, oracle, s, ReverseMode::Deterministic, rng);
    CHECK((back - x_lo).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("deterministic decode is bit-reproducible") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 200);
    const Eigen::MatrixXd xT = random_tensor(4, 4, 9);
    const DenoiserFn den = [](const Eigen::MatrixXd& x, int t, const Eigen::VectorXd&) {
        return (0.9 * x.array() + 0.01 * t).matrix().eval();
    };
    Rng r1(1), r2(2);
    const Eigen::MatrixXd a =
        decode(xT, Eigen::VectorXd::Zero(1), den, s, 20, ReverseMode::Deterministic, r1);
    const Eigen::MatrixXd b =
        decode(xT, Eigen::VectorXd::Zero(1), den, s, 20, ReverseMode::Deterministic, r2);
    CHECK(std::memcmp(a.data(), b.data(),
                      sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

TEST_CASE("stochastic decode is reproducible under a fixed seed") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 200);
    const Eigen::MatrixXd xT = random_tensor(4, 4, 10);
    const DenoiserFn den = [](const Eigen::MatrixXd& x, int, const Eigen::VectorXd&) {
        return (0.5 * x).eval();
    };
    Rng r1(77), r2(77), r3(78);
    const Eigen::MatrixXd a =
        decode(xT, Eigen::VectorXd::Zero(1), den, s, 20, ReverseMode::Stochastic, r1);
    const Eigen::MatrixXd b =
        decode(xT, Eigen::VectorXd::Zero(1), den, s, 20, ReverseMode::Stochastic, r2);
    const Eigen::MatrixXd c =
        decode(xT, Eigen::VectorXd::Zero(1), den, s, 20, ReverseMode::Stochastic, r3);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("schedule bounds are enforced") {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
    CHECK_THROWS_AS((void)s.at(-1), Error);
    CHECK_THROWS_AS((void)s.at(101), Error);
    CHECK_THROWS_AS((void)make_schedule(ScheduleKind::Cosine, 0), Error);
}
