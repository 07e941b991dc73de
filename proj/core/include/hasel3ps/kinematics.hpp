#pragma once

#include <array>

#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// Base anchor layout and antenna length of the 3PS platform. Anchors are
/// ordered counter-clockwise viewed from +Z so a level platform has its
/// normal pointing up.
struct PlatformGeometry {
    std::array<Eigen::Vector2d, 3> anchors = {
        Eigen::Vector2d(0.0, 0.023),
        Eigen::Vector2d(-0.023 * 0.8660254037844386, -0.0115),
        Eigen::Vector2d(0.023 * 0.8660254037844386, -0.0115)};
    double antenna_length = 0.05;  ///< L [m]

    /// Equilateral layout with the given circumradius; vertex 1 at +Y, then
    /// counter-clockwise.
    static PlatformGeometry equilateral(double circumradius, double antenna_length);

    Eigen::Vector2d base_centroid() const;

    /// Throws std::invalid_argument on collinear anchors or L <= 0.
    void validate() const;
};

/// Antenna tip position and the unit platform normal (n_z > 0).
struct TipPose {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

/// Forward kinematics: corner heights to tip pose.
/// P_i = (X_i, Y_i, h_i); the platform plane through the three corners has
/// unit normal n (flipped to n_z > 0) and the rigid antenna of length L is
/// perpendicular to it: Tip = mean(P_i) + L n.
/// Throws DegenerateGeometry when the corners are collinear.
TipPose fkm(const Vec3& heights, const PlatformGeometry& geom);

/// Inverse kinematics: tip position to corner heights.
/// The platform normal is estimated as the direction from the base centroid
/// to the tip; the platform plane through Tip - L n is then evaluated at the
/// anchors. Exact for level platforms, approximate under tilt.
/// Throws SingularNormal when n_z <= 1e-6.
Vec3 ikm(const Vec3& tip, const PlatformGeometry& geom);

}  // namespace hasel3ps
