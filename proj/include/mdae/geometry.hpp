#pragma once

#include "mdae/common.hpp"

namespace mdae::geom {

// Norms below this are treated as degenerate and rejected.
inline constexpr double kNormEps = 1e-12;
// Angles closer than this to 0 or pi take the degenerate-axis conventions.
inline constexpr double kAngleEps = 1e-8;

struct AxisAngle {
    Vec3 axis;    // unit
    double angle; // radians, in [0, pi]
};

/// Rotation taking the unit direction -a/|a| onto (b-a)/|b-a|.
/// At angle ~0 the axis is (0,0,1); at angle ~pi it is a deterministic
/// unit vector orthogonal to -a/|a|.
AxisAngle axis_angle_between(const Vec3& a, const Vec3& b);

/// Rodrigues rotation matrix for a unit axis and an angle.
Mat3 rodrigues_matrix(const Vec3& axis, double angle);

/// Rotate v about the unit axis u by angle theta (closed form).
Vec3 rotate_rodrigues(const Vec3& u, double theta, const Vec3& v);

/// First two columns of a rotation matrix (the 6D Stiefel encoding).
Mat32 to_stiefel(const Mat3& rotation);

/// Gram-Schmidt recovery of a proper rotation from two columns.
Mat3 from_stiefel(const Mat32& m);

/// Rotation angle from the trace, clamped into [0, pi].
double angle_of(const Mat3& rotation);

/// Unit rotation axis as the eigenvector of eigenvalue 1, sign fixed by
/// re-synthesis against rodrigues_matrix. Requires angle > 0.
Vec3 axis_of(const Mat3& rotation, double angle);

/// Place the child marker at distance d from a along the rotated
/// direction: rod(k, theta, -a/|a|) * d + a.
Vec3 reconstruct_marker(const Vec3& a, const Vec3& axis, double angle, double d);

/// Deterministic unit vector orthogonal to the unit vector u.
Vec3 orthogonal_unit(const Vec3& u);

} // namespace mdae::geom
