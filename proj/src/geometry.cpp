#include "mdae/geometry.hpp"

#include <cmath>

namespace mdae::geom {

Vec3 orthogonal_unit(const Vec3& u) {
    // Gram-Schmidt against the coordinate axis with the smallest |u_i|,
    // which is guaranteed to be far from parallel to u.
    int smallest = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(u[i]) < std::abs(u[smallest])) smallest = i;
    }
    Vec3 e = Vec3::Zero();
    e[smallest] = 1.0;
    Vec3 v = e - u.dot(e) * u;
    return v / v.norm();
}

AxisAngle axis_angle_between(const Vec3& a, const Vec3& b) {
    const double an = a.norm();
    if (an < kNormEps) throw Error("axis_angle_between: marker a at origin");
    const Vec3 ab = b - a;
    const double abn = ab.norm();
    if (abn < kNormEps) throw Error("axis_angle_between: coincident markers");

    const Vec3 ap = -a / an;
    const Vec3 bp = ab / abn;
    const Vec3 cross = ap.cross(bp);
    const double sin_part = cross.norm();
    const double cos_part = ap.dot(bp);
    const double angle = std::atan2(sin_part, cos_part); // in [0, pi]

    AxisAngle out;
    out.angle = angle;
    if (angle < kAngleEps) {
        out.axis = Vec3(0.0, 0.0, 1.0);
        out.angle = 0.0;
    } else if (angle > M_PI - kAngleEps) {
        out.axis = orthogonal_unit(ap);
        out.angle = M_PI;
    } else {
        out.axis = cross / sin_part;
    }
    return out;
}

Mat3 rodrigues_matrix(const Vec3& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
        throw Error("rodrigues_matrix: axis is not unit length");
    }
    Mat3 k;
    k << 0, -axis.z(), axis.y(),
         axis.z(), 0, -axis.x(),
        -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

Vec3 rotate_rodrigues(const Vec3& u, double theta, const Vec3& v) {
    if (std::abs(u.norm() - 1.0) > 1e-9) {
        throw Error("rotate_rodrigues: axis is not unit length");
    }
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return v * c + u.cross(v) * s + u * (u.dot(v)) * (1.0 - c);
}

Mat32 to_stiefel(const Mat3& rotation) {
    return rotation.leftCols<2>();
}

Mat3 from_stiefel(const Mat32& m) {
    const Vec3 c1 = m.col(0);
    const Vec3 c2 = m.col(1);
    const double n1 = c1.norm();
    if (n1 < kNormEps) throw Error("from_stiefel: zero first column");
    const Vec3 r1 = c1 / n1;
    Vec3 w = c2 - r1.dot(c2) * r1;
    const double nw = w.norm();
    if (nw < kNormEps) throw Error("from_stiefel: collinear columns");
    const Vec3 r2 = w / nw;
    const Vec3 r3 = r1.cross(r2);
    Mat3 out;
    out.col(0) = r1;
    out.col(1) = r2;
    out.col(2) = r3;
    return out;
}

double angle_of(const Mat3& rotation) {
    double c = (rotation.trace() - 1.0) / 2.0;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

Vec3 axis_of(const Mat3& rotation, double angle) {
    if (angle < kAngleEps) throw Error("axis_of: axis indeterminate at angle 0");
    // Eigenvector of (R - I) for eigenvalue 0, via the symmetric part trick:
    // for angle < pi the axis is proportional to the skew part; at pi the
    // skew part vanishes and we fall back to the dominant column of R + I.
    Vec3 k;
    if (angle < M_PI - kAngleEps) {
        k = Vec3(rotation(2, 1) - rotation(1, 2),
                 rotation(0, 2) - rotation(2, 0),
                 rotation(1, 0) - rotation(0, 1));
    } else {
        // R + I = 2 k k^T at angle pi; any nonzero column is parallel to k.
        Mat3 m = rotation + Mat3::Identity();
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (m.col(i).norm() > m.col(best).norm()) best = i;
        }
        k = m.col(best);
    }
    const double kn = k.norm();
    if (kn < kNormEps) throw Error("axis_of: degenerate rotation matrix");
    k /= kn;
    // Eigenvectors are sign-ambiguous; keep the sign whose re-synthesis
    // matches the input.
    const double err_pos = (rodrigues_matrix(k, angle) - rotation).norm();
    const double err_neg = (rodrigues_matrix(-k, angle) - rotation).norm();
    return err_neg < err_pos ? Vec3(-k) : k;
}

Vec3 reconstruct_marker(const Vec3& a, const Vec3& axis, double angle, double d) {
    const double an = a.norm();
    if (an < kNormEps) throw Error("reconstruct_marker: marker a at origin");
    if (d <= 0.0) throw Error("reconstruct_marker: nonpositive link distance");
    const Vec3 dir = rotate_rodrigues(axis, angle, Vec3(-a / an));
    return dir * d + a;
}

} // namespace mdae::geom
