// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "coopsim/geometry.hpp"
#include "coopsim/random.hpp"

namespace coopsim::scene {

/// Agent 0 is the ego vehicle; CAVs are numbered 1..K.
inline constexpr int kEgo = 0;

struct PointCloud {
    std::vector<Point3> points;
    int frame = kEgo;  ///< agent whose coordinate frame the points are in
};

struct SensorConfig {
    double max_range = 50.0;
    double azimuth_resolution_deg = 0.2;
    /// Returns per ray hit, spread evenly over the struck box's height.
    int vertical_samples = 8;
    double noise_std = 0.02;
    /// Spacing of roof returns along the ray's chord through the struck box
    /// (the sensor sits above vehicle roofs); 0 disables them.
    double roof_spacing = 0.2;
    /// Ground returns at these horizontal ranges on rays not blocked earlier.
    std::vector<double> ground_ranges{6.0, 9.0, 13.0, 18.0, 25.0, 35.0};
};

enum class Layout {
    /// Vehicles in lanes parallel to the ego's x axis.
    Road,
    /// Uniform positions and headings over the detection range.
    Open,
};

struct ScenarioConfig {
    int num_cavs = 2;
    int num_objects_min = 5;
    int num_objects_max = 10;
    Rect range;
    SensorConfig sensor;
    Layout layout = Layout::Road;
    double lane_width = 3.5;
    int lanes_per_side = 2;
    double yaw_jitter_deg = 5.0;
    double cav_min_distance = 10.0;
    double cav_max_distance = 40.0;
    int max_retries = 2000;

    void validate() const;
};

struct Scenario {
    Pose ego_pose;
    std::vector<Pose> cav_poses;
    /// Ground truth in the ego frame.
    std::vector<BoxLabel> gt_boxes;
    /// clouds[0] is the ego, clouds[k] CAV k; each in its own agent frame.
    std::vector<PointCloud> clouds;

    std::size_t num_cavs() const noexcept { return cav_poses.size(); }
    const Pose& pose_of(int agent) const { return agent == kEgo ? ego_pose : cav_poses.at(agent - 1); }
    /// d_k between CAV k (1-based) and the ego.
    double cav_distance(int k) const;
};

Scenario generate_scenario(const ScenarioConfig& cfg, Rng& rng);

/// 2D azimuth ray caster. `boxes` share the frame of `pose`; returned points are
/// in the sensor's own frame. When `hit_box` is given it receives, per point,
/// the index of the struck box or -1 for ground returns.
PointCloud sample_lidar(const Pose& pose, const std::vector<BoxLabel>& boxes,
                        const SensorConfig& sensor, Rng& rng, int frame_tag = kEgo,
                        std::vector<int>* hit_box = nullptr);

/// Maps a point from `src`'s frame into `dst`'s frame (both poses in a common frame).
Point3 transform_point(const Point3& p, const Pose& src, const Pose& dst) noexcept;

PointCloud transform_to_ego(const PointCloud& cloud, const Pose& src, const Pose& ego);

/// Expresses a box given in `src`'s frame in `dst`'s frame.
BoxLabel transform_box(const BoxLabel& b, const Pose& src, const Pose& dst);

PointCloud crop_to_range(const PointCloud& cloud, const Rect& range);

}  // namespace coopsim::scene
