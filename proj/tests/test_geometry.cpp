#include "mdae/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mdae;
using namespace mdae::geom;

namespace {

Rng rng(42);

Vec3 random_unit() {
    std::normal_distribution<double> g;
    Vec3 v;
    do {
        v = Vec3(g(rng), g(rng), g(rng));
    } while (v.norm() < 0.1);
    return v.normalized();
}

// Independent oracle: rotate v about unit axis k by theta via quaternions.
Vec3 quat_rotate(const Vec3& k, double theta, const Vec3& v) {
    const double w = std::cos(theta / 2);
    const Vec3 q = std::sin(theta / 2) * k;
    // v' = v + 2 q x (q x v + w v)
    return v + 2.0 * q.cross(q.cross(v) + w * v);
}

} // namespace

TEST_CASE("rodrigues rotation matches quaternion oracle") {
    std::uniform_real_distribution<double> ang(0.01, M_PI - 0.01);
    for (int i = 0; i < 200; ++i) {
        const Vec3 k = random_unit();
        const double theta = ang(rng);
        const Mat3 r = rodrigues_matrix(k, theta);
        const Vec3 v = random_unit() * 2.0;
        CHECK((r * v - quat_rotate(k, theta, v)).norm() < 1e-12);
        CHECK((rotate_rodrigues(k, theta, v) - quat_rotate(k, theta, v)).norm() < 1e-12);
        // proper rotation
        CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("axis_angle_between oracle on hand values") {
    // a = (1,0,0), b = (1,1,0): a' = (-1,0,0), b' = (0,1,0) -> angle pi/2,
    // axis = a' x b' / |.| = (0,0,-1).
    const AxisAngle aa = axis_angle_between(Vec3(1, 0, 0), Vec3(1, 1, 0));
    CHECK(aa.angle == doctest::Approx(M_PI / 2).epsilon(1e-12));
    CHECK((aa.axis - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("axis_angle_between + reconstruct_marker round trip") {
    std::normal_distribution<double> g;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 a(g(rng), g(rng), g(rng));
        const Vec3 b = a + Vec3(g(rng), g(rng), g(rng));
        if (a.norm() < 1e-3 || (b - a).norm() < 1e-3) continue;
        const AxisAngle aa = axis_angle_between(a, b);
        CHECK(std::abs(aa.axis.norm() - 1.0) < 1e-12);
        CHECK(aa.angle >= 0.0);
        CHECK(aa.angle <= M_PI);
        const Vec3 rec = reconstruct_marker(a, aa.axis, aa.angle, (b - a).norm());
        CHECK((rec - b).norm() < 1e-9);
    }
}

TEST_CASE("axis_angle_between degenerate conventions") {
    // b - a parallel to -a: angle ~ 0, axis pinned to (0,0,1).
    const AxisAngle zero = axis_angle_between(Vec3(2, 0, 0), Vec3(1, 0, 0));
    CHECK(zero.angle < 1e-12);
    CHECK((zero.axis - Vec3(0, 0, 1)).norm() < 1e-12);
    // b - a parallel to a: angle ~ pi, axis orthogonal to a.
    const Vec3 a(1, 2, 3);
    const AxisAngle pi_case = axis_angle_between(a, 2 * a);
    CHECK(pi_case.angle == doctest::Approx(M_PI).epsilon(1e-12));
    CHECK(std::abs(pi_case.axis.dot(a.normalized())) < 1e-12);
    const Vec3 rec = reconstruct_marker(a, pi_case.axis, pi_case.angle, a.norm());
    CHECK((rec - 2 * a).norm() < 1e-9);
}

TEST_CASE("stiefel encoding round trip") {
    std::uniform_real_distribution<double> ang(0.01, M_PI - 0.01);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = rodrigues_matrix(random_unit(), ang(rng));
        const Mat3 back = from_stiefel(to_stiefel(r));
        CHECK((back - r).norm() < 1e-9);
    }
}

TEST_CASE("from_stiefel hand Gram-Schmidt oracle") {
    Mat32 m;
    m << 2, 1, //
        0, 1,  //
        0, 0;
    // r1 = (1,0,0); r2 = N((1,1,0) - 1*(1,0,0)) = (0,1,0); r3 = (0,0,1).
    const Mat3 r = from_stiefel(m);
    CHECK((r - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("from_stiefel rejects degenerate input") {
    Mat32 zero_col;
    zero_col << 0, 1, 0, 0, 0, 0;
    CHECK_THROWS_AS((void)from_stiefel(zero_col), Error);
    Mat32 collinear;
    collinear << 1, 2, 1, 2, 0, 0;
    CHECK_THROWS_AS((void)from_stiefel(collinear), Error);
}

TEST_CASE("angle_of and axis_of recover the generating rotation") {
    std::uniform_real_distribution<double> ang(0.05, M_PI - 0.05);
    for (int i = 0; i < 500; ++i) {
        const Vec3 k = random_unit();
        const double theta = ang(rng);
        const Mat3 r = rodrigues_matrix(k, theta);
        const double rec_angle = angle_of(r);
        CHECK(rec_angle == doctest::Approx(theta).epsilon(1e-9));
        const Vec3 rec_axis = axis_of(r, rec_angle);
        CHECK((rodrigues_matrix(rec_axis, rec_angle) - r).norm() < 1e-8);
    }
}

TEST_CASE("axis_of near pi") {
    const Vec3 k = Vec3(1, 1, 1).normalized();
    const Mat3 r = rodrigues_matrix(k, M_PI);
    const Vec3 rec = axis_of(r, angle_of(r));
    CHECK(std::min((rec - k).norm(), (rec + k).norm()) < 1e-6);
}

TEST_CASE("orthogonal_unit is orthogonal, unit, deterministic") {
    for (int i = 0; i < 200; ++i) {
        const Vec3 u = random_unit();
        const Vec3 o = orthogonal_unit(u);
        CHECK(std::abs(o.norm() - 1.0) < 1e-12);
        CHECK(std::abs(o.dot(u)) < 1e-12);
        CHECK((orthogonal_unit(u) - o).norm() == 0.0);
    }
}
