// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

namespace coopsim {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a) noexcept;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Point3&, const Point3&) = default;
};

/// Planar pose of an agent: position in meters, heading in radians.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;

    /// Validates finiteness and wraps yaw.
    static Pose make(double x, double y, double z, double yaw);

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Oriented 3D box; `yaw` rotates the length axis away from +x.
struct BoxLabel {
    Point3 center;
    double length = 1.0;
    double width = 1.0;
    double height = 1.0;
    double yaw = 0.0;

    /// Validates positive dimensions and wraps yaw.
    static BoxLabel make(Point3 center, double length, double width, double height, double yaw);

    /// BEV footprint corners, counter-clockwise.
    std::array<Vec2, 4> corners() const;

    friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

/// Axis-aligned rectangle in the ego ground plane.
struct Rect {
    double x_min = -140.0;
    double x_max = 140.0;
    double y_min = -40.0;
    double y_max = 40.0;

    bool contains(double x, double y) const noexcept {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
};

/// Signed area of a simple polygon (positive when counter-clockwise).
double polygon_area(const std::vector<Vec2>& poly) noexcept;

/// Intersection of two convex counter-clockwise polygons.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear points.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Minimum-area enclosing rectangle of a convex polygon via rotating calipers.
struct OrientedRect {
    Vec2 center;
    double length = 0.0;  ///< long side
    double width = 0.0;   ///< short side
    double yaw = 0.0;     ///< direction of the long side
};
OrientedRect min_area_rect(const std::vector<Vec2>& hull);

}  // namespace coopsim
