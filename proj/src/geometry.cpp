// SPDX-License-Identifier: Apache-2.0
#include "coopsim/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "coopsim/errors.hpp"

namespace coopsim {

double wrap_angle(double a) noexcept {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

Pose Pose::make(double x, double y, double z, double yaw) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(yaw))
        throw DomainError("pose coordinates must be finite");
    return Pose{x, y, z, wrap_angle(yaw)};
}

BoxLabel BoxLabel::make(Point3 center, double length, double width, double height, double yaw) {
    if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0))
        throw DomainError("box dimensions must be positive");
    if (!std::isfinite(center.x) || !std::isfinite(center.y) || !std::isfinite(center.z) ||
        !std::isfinite(length) || !std::isfinite(width) || !std::isfinite(height) ||
        !std::isfinite(yaw))
        throw DomainError("box parameters must be finite");
    return BoxLabel{center, length, width, height, wrap_angle(yaw)};
}

std::array<Vec2, 4> BoxLabel::corners() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double hl = 0.5 * length, hw = 0.5 * width;
    const std::array<Vec2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
    std::array<Vec2, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = {center.x + c * local[i].x - s * local[i].y,
                  center.y + s * local[i].x + c * local[i].y};
    }
    return out;
}

double polygon_area(const std::vector<Vec2>& poly) noexcept {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

// Sutherland-Hodgman against each edge of the (convex, CCW) clip polygon.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
    std::vector<Vec2> out = subject;
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !out.empty(); ++e) {
        const Vec2 a = clip[e];
        const Vec2 b = clip[(e + 1) % m];
        std::vector<Vec2> in;
        in.swap(out);
        const std::size_t n = in.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 p = in[i];
            const Vec2 q = in[(i + 1) % n];
            const double dp = cross(a, b, p);
            const double dq = cross(a, b, q);
            if (dp >= 0.0) out.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                const double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
    }
    return out;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(),
              [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

OrientedRect min_area_rect(const std::vector<Vec2>& hull) {
    OrientedRect best;
    if (hull.empty()) return best;
    if (hull.size() == 1) {
        best.center = hull[0];
        return best;
    }
    double best_area = -1.0;
    const std::size_t n = hull.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % n];
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len = std::hypot(ex, ey);
        if (len == 0.0) continue;
        const double ux = ex / len, uy = ey / len;
        double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
        for (const auto& p : hull) {
            const double pu = p.x * ux + p.y * uy;
            const double pv = -p.x * uy + p.y * ux;
            lo_u = std::min(lo_u, pu);
            hi_u = std::max(hi_u, pu);
            lo_v = std::min(lo_v, pv);
            hi_v = std::max(hi_v, pv);
        }
        const double area = (hi_u - lo_u) * (hi_v - lo_v);
        // strict improvement with slack keeps the choice stable under round-off
        if (best_area < 0.0 || area < best_area * (1.0 - 1e-12)) {
            best_area = area;
            const double cu = 0.5 * (lo_u + hi_u), cv = 0.5 * (lo_v + hi_v);
            best.center = {cu * ux - cv * uy, cu * uy + cv * ux};
            const double du = hi_u - lo_u, dv = hi_v - lo_v;
            if (du >= dv) {
                best.length = du;
                best.width = dv;
                best.yaw = std::atan2(uy, ux);
            } else {
                best.length = dv;
                best.width = du;
                best.yaw = std::atan2(ux, -uy);
            }
        }
    }
    // long axis direction is only defined up to pi
    if (best.yaw > kPi / 2) best.yaw -= kPi;
    if (best.yaw <= -kPi / 2) best.yaw += kPi;
    return best;
}

}  // namespace coopsim
