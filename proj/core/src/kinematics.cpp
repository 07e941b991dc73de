#include "hasel3ps/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace hasel3ps {

namespace {
constexpr double kSingularNz = 1e-6;
constexpr double kDegenerateCross = 1e-15;
}  // namespace

PlatformGeometry PlatformGeometry::equilateral(double circumradius,
                                               double antenna_length) {
    if (!(circumradius > 0.0))
        throw std::invalid_argument("PlatformGeometry: circumradius must be > 0");
    PlatformGeometry g;
    for (int i = 0; i < 3; ++i) {
        const double a = M_PI / 2.0 + i * 2.0 * M_PI / 3.0;
        g.anchors[i] = circumradius * Eigen::Vector2d(std::cos(a), std::sin(a));
    }
    g.antenna_length = antenna_length;
    g.validate();
    return g;
}

Eigen::Vector2d PlatformGeometry::base_centroid() const {
    return (anchors[0] + anchors[1] + anchors[2]) / 3.0;
}

void PlatformGeometry::validate() const {
    if (!(antenna_length > 0.0))
        throw std::invalid_argument("PlatformGeometry: antenna_length must be > 0");
    const Eigen::Vector2d v1 = anchors[1] - anchors[0];
    const Eigen::Vector2d v2 = anchors[2] - anchors[0];
    const double cross = v1.x() * v2.y() - v1.y() * v2.x();
    if (std::abs(cross) < kDegenerateCross)
        throw std::invalid_argument("PlatformGeometry: anchors are collinear");
}

TipPose fkm(const Vec3& heights, const PlatformGeometry& geom) {
    std::array<Vec3, 3> corners;
    for (int i = 0; i < 3; ++i)
        corners[i] = Vec3(geom.anchors[i].x(), geom.anchors[i].y(), heights[i]);

    const Vec3 v1 = corners[1] - corners[0];
    const Vec3 v2 = corners[2] - corners[0];
    Vec3 cross = v1.cross(v2);
    const double norm = cross.norm();
    if (norm < kDegenerateCross)
        throw DegenerateGeometry("fkm: corner points are collinear");

    TipPose pose;
    pose.normal = cross / norm;
    if (pose.normal.z() < 0.0) pose.normal = -pose.normal;  // antenna points up
    const Vec3 centroid = (corners[0] + corners[1] + corners[2]) / 3.0;
    pose.position = centroid + geom.antenna_length * pose.normal;
    return pose;
}

Vec3 ikm(const Vec3& tip, const PlatformGeometry& geom) {
    const Eigen::Vector2d cb = geom.base_centroid();
    const Vec3 v(tip.x() - cb.x(), tip.y() - cb.y(), tip.z());
    const double vn = v.norm();
    if (!(vn > 0.0)) throw SingularNormal("ikm: tip coincides with the base centroid");
    const Vec3 n = v / vn;
    if (n.z() <= kSingularNz)
        throw SingularNormal("ikm: platform normal too close to horizontal");

    const Vec3 cp = tip - geom.antenna_length * n;
    Vec3 h;
    for (int i = 0; i < 3; ++i) {
        h[i] = cp.z() - (n.x() * (geom.anchors[i].x() - cp.x()) +
                         n.y() * (geom.anchors[i].y() - cp.y())) /
                            n.z();
    }
    return h;
}

}  // namespace hasel3ps
