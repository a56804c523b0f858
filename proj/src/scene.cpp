// SPDX-License-Identifier: Apache-2.0
#include "coopsim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coopsim/errors.hpp"
#include "coopsim/perception.hpp"

namespace coopsim::scene {

namespace {

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double deg2rad(double d) { return d * kPi / 180.0; }

struct Span {
    double enter = std::numeric_limits<double>::infinity();
    double exit = std::numeric_limits<double>::infinity();
};

// Entry and exit distances of the ray o + t d through the box footprint; enter is +inf on a miss.
Span ray_box(double ox, double oy, double dx, double dy, const BoxLabel& b) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double rx = ox - b.center.x, ry = oy - b.center.y;
    const double lox = c * rx + s * ry, loy = -s * rx + c * ry;
    const double ldx = c * dx + s * dy, ldy = -s * dx + c * dy;
    const double hl = 0.5 * b.length, hw = 0.5 * b.width;
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    const auto slab = [&](double o, double d, double h) {
        if (d == 0.0) return std::abs(o) <= h;
        double a = (-h - o) / d, bb = (h - o) / d;
        if (a > bb) std::swap(a, bb);
        t0 = std::max(t0, a);
        t1 = std::min(t1, bb);
        return true;
    };
    if (!slab(lox, ldx, hl) || !slab(loy, ldy, hw)) return {};
    // sensor inside the footprint sees nothing of this box
    if (t0 > t1 || t0 < 0.0) return {};
    return {t0, t1};
}

bool overlaps_any(const BoxLabel& b, const std::vector<BoxLabel>& others) {
    for (const auto& o : others) {
        const double reach = 0.5 * (std::hypot(b.length, b.width) + std::hypot(o.length, o.width));
        if (std::hypot(b.center.x - o.center.x, b.center.y - o.center.y) > reach) continue;
        if (perception::rotated_iou_bev(b, o) > 0.0) return true;
    }
    return false;
}

BoxLabel random_vehicle(Rng& rng, double x, double y, double yaw) {
    const double l = uniform(rng, 3.5, 5.5);
    const double w = uniform(rng, 1.6, 2.1);
    const double h = uniform(rng, 1.4, 1.8);
    return BoxLabel::make({x, y, 0.5 * h}, l, w, h, yaw);
}

}  // namespace

void ScenarioConfig::validate() const {
    if (num_cavs < 0 || num_cavs > 6) throw DomainError("num_cavs must be in [0, 6]");
    if (num_objects_min < 1 || num_objects_max > 30 || num_objects_min > num_objects_max)
        throw DomainError("object count range must lie within [1, 30]");
    if (!(range.width() > 0.0) || !(range.height() > 0.0))
        throw DomainError("detection range must have positive extent");
    if (!(sensor.max_range > 0.0) || !(sensor.azimuth_resolution_deg > 0.0) ||
        sensor.vertical_samples < 1 || !(sensor.noise_std >= 0.0))
        throw DomainError("invalid sensor configuration");
    if (!(lane_width > 0.0) || lanes_per_side < 0) throw DomainError("invalid lane layout");
    if (!(cav_min_distance > 0.0) || cav_max_distance < cav_min_distance)
        throw DomainError("invalid CAV distance interval");
}

double Scenario::cav_distance(int k) const {
    const Pose& c = cav_poses.at(static_cast<std::size_t>(k - 1));
    return std::sqrt((c.x - ego_pose.x) * (c.x - ego_pose.x) + (c.y - ego_pose.y) * (c.y - ego_pose.y) +
                     (c.z - ego_pose.z) * (c.z - ego_pose.z));
}

Scenario generate_scenario(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    Scenario s;
    s.ego_pose = Pose{};

    const int lanes = 2 * cfg.lanes_per_side + 1;
    const auto lane_y = [&](int j) { return (j - cfg.lanes_per_side) * cfg.lane_width; };
    const auto lane_yaw = [&](int j) { return j - cfg.lanes_per_side <= 0 ? 0.0 : kPi; };

    // agents are kept clear of objects so no sensor starts inside a box
    std::vector<BoxLabel> keep_out{BoxLabel::make({0.0, 0.0, 0.8}, 5.0, 2.2, 1.6, 0.0)};

    for (int k = 0; k < cfg.num_cavs; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
            double x, y, yaw;
            if (cfg.layout == Layout::Road) {
                const int j = uniform_int(rng, 0, lanes - 1);
                const double dist = uniform(rng, cfg.cav_min_distance, cfg.cav_max_distance);
                x = (rng() & 1) ? dist : -dist;
                y = lane_y(j);
                yaw = lane_yaw(j) + deg2rad(uniform(rng, -cfg.yaw_jitter_deg, cfg.yaw_jitter_deg));
            } else {
                const double dist = uniform(rng, cfg.cav_min_distance, cfg.cav_max_distance);
                const double ang = uniform(rng, -kPi, kPi);
                x = dist * std::cos(ang);
                y = dist * std::sin(ang);
                yaw = uniform(rng, -kPi, kPi);
            }
            if (!cfg.range.contains(x, y)) continue;
            const double d = std::hypot(x, y);
            if (d < cfg.cav_min_distance || d > cfg.cav_max_distance) continue;
            const BoxLabel body = BoxLabel::make({x, y, 0.8}, 5.0, 2.2, 1.6, yaw);
            if (overlaps_any(body, keep_out)) continue;
            keep_out.push_back(body);
            s.cav_poses.push_back(Pose::make(x, y, 0.0, yaw));
            placed = true;
        }
        if (!placed) throw GenerationError("could not place CAV " + std::to_string(k + 1));
    }

    const int n_objects = uniform_int(rng, cfg.num_objects_min, cfg.num_objects_max);
    const double margin = 3.0;
    for (int i = 0; i < n_objects; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
            double x, y, yaw;
            if (cfg.layout == Layout::Road) {
                const int j = uniform_int(rng, 0, lanes - 1);
                x = uniform(rng, cfg.range.x_min + margin, cfg.range.x_max - margin);
                y = lane_y(j) + uniform(rng, -0.3, 0.3);
                yaw = lane_yaw(j) + deg2rad(uniform(rng, -cfg.yaw_jitter_deg, cfg.yaw_jitter_deg));
            } else {
                x = uniform(rng, cfg.range.x_min + margin, cfg.range.x_max - margin);
                y = uniform(rng, cfg.range.y_min + margin, cfg.range.y_max - margin);
                yaw = uniform(rng, -kPi, kPi);
            }
            if (!cfg.range.contains(x, y)) continue;
            const BoxLabel b = random_vehicle(rng, x, y, yaw);
            if (overlaps_any(b, keep_out) || overlaps_any(b, s.gt_boxes)) continue;
            s.gt_boxes.push_back(b);
            placed = true;
        }
        if (!placed) throw GenerationError("could not place object " + std::to_string(i + 1) +
                                           " without overlap");
    }

    s.clouds.push_back(sample_lidar(s.ego_pose, s.gt_boxes, cfg.sensor, rng, kEgo));
    for (std::size_t k = 0; k < s.cav_poses.size(); ++k)
        s.clouds.push_back(
            sample_lidar(s.cav_poses[k], s.gt_boxes, cfg.sensor, rng, static_cast<int>(k + 1)));
    return s;
}

PointCloud sample_lidar(const Pose& pose, const std::vector<BoxLabel>& boxes,
                        const SensorConfig& sensor, Rng& rng, int frame_tag,
                        std::vector<int>* hit_box) {
    PointCloud cloud;
    cloud.frame = frame_tag;
    if (hit_box) hit_box->clear();
    const int rays = std::max(1, static_cast<int>(std::lround(360.0 / sensor.azimuth_resolution_deg)));
    const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    const auto noise = [&]() { return sensor.noise_std > 0.0 ? sensor.noise_std * standard_normal(rng) : 0.0; };

    for (int r = 0; r < rays; ++r) {
        // ray direction in the sensor frame, then in the common frame
        const double a = -kPi + (r + 0.5) * 2.0 * kPi / rays;
        const double lx = std::cos(a), ly = std::sin(a);
        const double wx = cy * lx - sy * ly, wy = sy * lx + cy * ly;

        Span first;
        int hit = -1;
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            const Span sp = ray_box(pose.x, pose.y, wx, wy, boxes[b]);
            if (sp.enter < first.enter) {
                first = sp;
                hit = static_cast<int>(b);
            }
        }
        const double t_hit = first.enter;
        for (double g : sensor.ground_ranges) {
            if (g > sensor.max_range || g >= t_hit) continue;
            cloud.points.push_back({g * lx + noise(), g * ly + noise(), -pose.z + noise()});
            if (hit_box) hit_box->push_back(-1);
        }
        if (hit < 0 || t_hit > sensor.max_range) continue;
        const BoxLabel& b = boxes[static_cast<std::size_t>(hit)];
        const double bottom = b.center.z - 0.5 * b.height - pose.z;
        for (int v = 0; v < sensor.vertical_samples; ++v) {
            const double z = bottom + b.height * (v + 0.5) / sensor.vertical_samples;
            cloud.points.push_back({t_hit * lx + noise(), t_hit * ly + noise(), z + noise()});
            if (hit_box) hit_box->push_back(hit);
        }
        if (sensor.roof_spacing <= 0.0) continue;
        const double top = bottom + b.height;
        for (double t = t_hit + sensor.roof_spacing; t <= std::min(first.exit, sensor.max_range);
             t += sensor.roof_spacing) {
            cloud.points.push_back({t * lx + noise(), t * ly + noise(), top + noise()});
            if (hit_box) hit_box->push_back(hit);
        }
    }
    return cloud;
}

Point3 transform_point(const Point3& p, const Pose& src, const Pose& dst) noexcept {
    const double cs = std::cos(src.yaw), ss = std::sin(src.yaw);
    const double wx = cs * p.x - ss * p.y + src.x;
    const double wy = ss * p.x + cs * p.y + src.y;
    const double wz = p.z + src.z;
    const double cd = std::cos(dst.yaw), sd = std::sin(dst.yaw);
    const double rx = wx - dst.x, ry = wy - dst.y;
    return {cd * rx + sd * ry, -sd * rx + cd * ry, wz - dst.z};
}

PointCloud transform_to_ego(const PointCloud& cloud, const Pose& src, const Pose& ego) {
    PointCloud out;
    out.frame = kEgo;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back(transform_point(p, src, ego));
    return out;
}

BoxLabel transform_box(const BoxLabel& b, const Pose& src, const Pose& dst) {
    const Point3 c = transform_point(b.center, src, dst);
    return BoxLabel::make(c, b.length, b.width, b.height, b.yaw + src.yaw - dst.yaw);
}

PointCloud crop_to_range(const PointCloud& cloud, const Rect& range) {
    PointCloud out;
    out.frame = cloud.frame;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points)
        if (range.contains(p.x, p.y)) out.points.push_back(p);
    return out;
}

}  // namespace coopsim::scene
