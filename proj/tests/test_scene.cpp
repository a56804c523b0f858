// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "coopsim/channel.hpp"
#include "coopsim/errors.hpp"
#include "coopsim/perception.hpp"
#include "coopsim/scene.hpp"
#include "coopsim/scene_io.hpp"
#include "generators.hpp"

using namespace coopsim;
using namespace coopsim::scene;

namespace {

SensorConfig bare_sensor(double max_range = 50.0) {
    SensorConfig s;
    s.max_range = max_range;
    s.noise_std = 0.0;
    s.roof_spacing = 0.0;
    s.ground_ranges.clear();
    return s;
}

// Point expressed in the box frame (x along length).
Vec2 box_local(const Point3& p, const BoxLabel& b) {
    const double dx = p.x - b.center.x, dy = p.y - b.center.y;
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    return {c * dx + s * dy, -s * dx + c * dy};
}

bool on_perimeter(const Point3& p, const BoxLabel& b, double tol) {
    const Vec2 l = box_local(p, b);
    const double hl = 0.5 * b.length, hw = 0.5 * b.width;
    const bool on_x = std::abs(std::abs(l.x) - hl) < tol && std::abs(l.y) <= hw + tol;
    const bool on_y = std::abs(std::abs(l.y) - hw) < tol && std::abs(l.x) <= hl + tol;
    return on_x || on_y;
}

// Independent slab test: entry distance of a ray into a box footprint, +inf on a miss.
double slab_entry(double ox, double oy, double dx, double dy, const BoxLabel& b) {
    const Vec2 o = box_local({ox, oy, 0}, b);
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double ddx = c * dx + s * dy, ddy = -s * dx + c * dy;
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    const double lo[2] = {-0.5 * b.length, -0.5 * b.width}, hi[2] = {0.5 * b.length, 0.5 * b.width};
    const double org[2] = {o.x, o.y}, dir[2] = {ddx, ddy};
    for (int a = 0; a < 2; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
            if (org[a] < lo[a] || org[a] > hi[a]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double ta = (lo[a] - org[a]) / dir[a], tb = (hi[a] - org[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1 || t1 < 0) return std::numeric_limits<double>::infinity();
    return std::max(t0, 0.0);
}

std::vector<int> hits_per_box(const std::vector<int>& hit, std::size_t boxes) {
    std::vector<int> n(boxes, 0);
    for (int h : hit)
        if (h >= 0) ++n[static_cast<std::size_t>(h)];
    return n;
}

ScenarioConfig small_config(Rng& r) {
    ScenarioConfig c;
    c.num_cavs = gen::integer(r, 0, 3);
    c.num_objects_min = gen::integer(r, 1, 6);
    c.num_objects_max = c.num_objects_min + gen::integer(r, 0, 4);
    c.range = {-60, 60, -20, 20};
    c.layout = gen::integer(r, 0, 1) ? Layout::Road : Layout::Open;
    c.sensor.azimuth_resolution_deg = 1.0;
    c.cav_min_distance = 10;
    c.cav_max_distance = 30;
    return c;
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("pose and box construction wraps yaw and rejects bad input") {
    CHECK(Pose::make(0, 0, 0, 3 * kPi).yaw == doctest::Approx(kPi));
    CHECK(Pose::make(0, 0, 0, -kPi).yaw == doctest::Approx(kPi));
    CHECK_THROWS_AS(Pose::make(std::nan(""), 0, 0, 0), DomainError);
    CHECK_THROWS_AS(BoxLabel::make({0, 0, 0}, 0.0, 1, 1, 0), DomainError);
    CHECK_THROWS_AS(BoxLabel::make({0, 0, 0}, 1, -1, 1, 0), DomainError);
}

TEST_CASE("minimal scenario") {
    ScenarioConfig c;
    c.num_cavs = 0;
    c.num_objects_min = c.num_objects_max = 1;
    Rng r = make_stream(1, 0, 0, StreamPurpose::Scenario);
    const Scenario s = generate_scenario(c, r);
    CHECK(s.gt_boxes.size() == 1);
    CHECK(s.clouds.size() == 1);
    CHECK(s.num_cavs() == 0);
}

TEST_CASE("generation is deterministic, overlap free and within range") {
    Rng meta = make_stream(2, 0, 0, StreamPurpose::Scenario);
    for (int trial = 0; trial < 100; ++trial) {
        const ScenarioConfig c = small_config(meta);
        Rng a = make_stream(3, trial, 0, StreamPurpose::Scenario);
        Rng b = make_stream(3, trial, 0, StreamPurpose::Scenario);
        const Scenario s = generate_scenario(c, a);
        CHECK(scenario_to_string(s) == scenario_to_string(generate_scenario(c, b)));
        CHECK(s.num_cavs() == static_cast<std::size_t>(c.num_cavs));
        CHECK(s.clouds.size() == s.num_cavs() + 1);
        const int n = static_cast<int>(s.gt_boxes.size());
        CHECK(n >= c.num_objects_min);
        CHECK(n <= c.num_objects_max);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) CHECK(perception::rotated_iou_bev(s.gt_boxes[i], s.gt_boxes[j]) == 0.0);
            CHECK(c.range.contains(s.gt_boxes[i].center.x, s.gt_boxes[i].center.y));
        }
        for (std::size_t k = 1; k <= s.num_cavs(); ++k) {
            const double d = s.cav_distance(static_cast<int>(k));
            CHECK(d > 0.0);
            CHECK(d >= c.cav_min_distance - 1e-9);
            CHECK(d <= c.cav_max_distance + 1e-9);
        }
    }
}

TEST_CASE("invalid configuration") {
    ScenarioConfig c;
    c.num_cavs = 7;
    Rng r = make_stream(1, 0, 0, StreamPurpose::Scenario);
    CHECK_THROWS_AS(generate_scenario(c, r), DomainError);
    c = {};
    c.num_objects_max = 31;
    CHECK_THROWS_AS(generate_scenario(c, r), DomainError);
    c = {};
    c.num_objects_min = c.num_objects_max = 30;
    c.range = {-5, 5, -3, 3};
    c.max_retries = 50;
    CHECK_THROWS_AS(generate_scenario(c, r), GenerationError);
}

TEST_CASE("lidar points lie on the struck box outline") {
    Rng r = make_stream(4, 0, 0, StreamPurpose::Lidar);
    const BoxLabel b = BoxLabel::make({5, 0, 0.8}, 4.0, 1.8, 1.6, 0.3);
    std::vector<int> hit;
    const PointCloud c = sample_lidar(Pose{}, {b}, bare_sensor(), r, kEgo, &hit);
    REQUIRE(!c.points.empty());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        CHECK(hit[i] == 0);
        CHECK(on_perimeter(c.points[i], b, 1e-9));
        CHECK(c.points[i].z >= 0.0);
        CHECK(c.points[i].z <= 1.6);
    }
}

TEST_CASE("range limit") {
    Rng r = make_stream(5, 0, 0, StreamPurpose::Lidar);
    const BoxLabel far = BoxLabel::make({60, 0, 0.8}, 4.0, 1.8, 1.6, 0.0);
    CHECK(sample_lidar(Pose{}, {far}, bare_sensor(50.0), r).points.empty());
    CHECK(!sample_lidar(Pose{}, {far}, bare_sensor(70.0), r).points.empty());
}

TEST_CASE("occlusion by a nearer box") {
    Rng r = make_stream(6, 0, 0, StreamPurpose::Lidar);
    const BoxLabel a = BoxLabel::make({6, 0, 0.8}, 2.0, 3.0, 1.6, 0.0);
    const BoxLabel b = BoxLabel::make({14, 0, 0.8}, 2.0, 2.0, 1.6, 0.0);
    std::vector<int> hit;
    sample_lidar(Pose{}, {a, b}, bare_sensor(), r, kEgo, &hit);
    CHECK(hits_per_box(hit, 2)[1] == 0);
    sample_lidar(Pose::make(0, 6, 0, 0), {a, b}, bare_sensor(), r, kEgo, &hit);
    CHECK(hits_per_box(hit, 2)[1] > 0);
}

TEST_CASE("every return is the nearest box along its ray") {
    Rng r = make_stream(7, 0, 0, StreamPurpose::Lidar);
    SensorConfig s = bare_sensor(40.0);
    s.azimuth_resolution_deg = 1.0;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<BoxLabel> boxes;
        for (int i = 0; i < 6; ++i) {
            BoxLabel b = gen::box(r, 20.0);
            if (std::hypot(b.center.x, b.center.y) > 4.0) boxes.push_back(b);
        }
        const Pose p = Pose::make(0, 0, 0, gen::uniform(r, -kPi, kPi));
        std::vector<int> hit;
        const PointCloud c = sample_lidar(p, boxes, s, r, kEgo, &hit);
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            const Point3 w = transform_point(c.points[i], p, Pose{});
            const double range = std::hypot(w.x, w.y);
            const double dx = w.x / range, dy = w.y / range;
            double best = std::numeric_limits<double>::infinity();
            int who = -1;
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                const double t = slab_entry(0, 0, dx, dy, boxes[b]);
                if (t < best) best = t, who = static_cast<int>(b);
            }
            CHECK(who == hit[i]);
            CHECK(std::abs(best - range) < 1e-9);
        }
    }
}

TEST_CASE("removing an occluder never removes points from other boxes") {
    Rng r = make_stream(8, 0, 0, StreamPurpose::Lidar);
    SensorConfig s = bare_sensor(40.0);
    s.azimuth_resolution_deg = 0.5;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<BoxLabel> boxes;
        for (int i = 0; i < 5; ++i) {
            BoxLabel b = gen::box(r, 15.0);
            if (std::hypot(b.center.x, b.center.y) > 4.0) boxes.push_back(b);
        }
        if (boxes.size() < 2) continue;
        std::vector<int> hit;
        sample_lidar(Pose{}, boxes, s, r, kEgo, &hit);
        const auto full = hits_per_box(hit, boxes.size());
        for (std::size_t drop = 0; drop < boxes.size(); ++drop) {
            auto fewer = boxes;
            fewer.erase(fewer.begin() + static_cast<long>(drop));
            sample_lidar(Pose{}, fewer, s, r, kEgo, &hit);
            const auto after = hits_per_box(hit, fewer.size());
            for (std::size_t j = 0; j < fewer.size(); ++j) CHECK(after[j] >= full[j < drop ? j : j + 1]);
        }
    }
}

TEST_CASE("rigid transforms") {
    const Pose src = Pose::make(10, 0, 0, 0);
    CHECK(transform_point({1, 0, 0}, src, Pose{}) == Point3{11, 0, 0});

    Rng r = make_stream(9, 0, 0, StreamPurpose::Scenario);
    for (int trial = 0; trial < 200; ++trial) {
        const Pose a = gen::pose(r), b = gen::pose(r);
        const PointCloud c = gen::cloud(r, 20);
        const PointCloud same = transform_to_ego(c, a, a);
        const PointCloud there = transform_to_ego(c, a, b);
        const PointCloud back = transform_to_ego(there, b, a);
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            CHECK(std::abs(same.points[i].x - c.points[i].x) < 1e-12);
            CHECK(std::abs(same.points[i].y - c.points[i].y) < 1e-12);
            CHECK(std::abs(back.points[i].x - c.points[i].x) < 1e-9);
            CHECK(std::abs(back.points[i].y - c.points[i].y) < 1e-9);
            CHECK(std::abs(back.points[i].z - c.points[i].z) < 1e-9);
            const auto& p = c.points[i];
            const auto& q = c.points[(i + 1) % c.points.size()];
            const auto& tp = there.points[i];
            const auto& tq = there.points[(i + 1) % c.points.size()];
            const double d0 = std::hypot(p.x - q.x, p.y - q.y, p.z - q.z);
            const double d1 = std::hypot(tp.x - tq.x, tp.y - tq.y, tp.z - tq.z);
            CHECK(std::abs(d0 - d1) < 1e-9);
        }
        const BoxLabel bx = gen::box(r);
        const BoxLabel bb = transform_box(transform_box(bx, a, b), b, a);
        CHECK(std::abs(bb.center.x - bx.center.x) < 1e-9);
        CHECK(std::abs(wrap_angle(bb.yaw - bx.yaw)) < 1e-9);
    }
}

TEST_CASE("cropping") {
    const Rect range{-140, 140, -40, 40};
    PointCloud c;
    c.points = {{0, 0, 0}, {10, -5, 1}, {-139, 39, 0}};
    CHECK(crop_to_range(c, range).points == c.points);
    c.points.push_back({1000, 0, 0});
    const PointCloud once = crop_to_range(c, range);
    CHECK(once.points.size() == 3);
    CHECK(crop_to_range(once, range).points == once.points);

    Rng r = make_stream(10, 0, 0, StreamPurpose::Scenario);
    for (int trial = 0; trial < 50; ++trial) {
        const PointCloud g = gen::cloud(r, 100, 200);
        const Rect box{-50, 60, -30, 20};
        const PointCloud a = crop_to_range(g, box);
        CHECK(crop_to_range(a, box).points == a.points);
    }
}

TEST_CASE("receiver-side crop removes more of a noisier cloud") {
    const Rect range{-30, 30, -10, 10};
    const auto surviving = [&](double snr) {
        std::size_t kept = 0, total = 0;
        for (int f = 0; f < 100; ++f) {
            Rng r = make_stream(11, static_cast<std::uint64_t>(f), 1, StreamPurpose::Link);
            PointCloud c = gen::cloud(r, 60);
            for (auto& p : c.points) p = {p.x * 1.4, p.y * 0.45, p.z};
            c = crop_to_range(c, range);
            std::vector<double> flat;
            for (const auto& p : c.points) flat.insert(flat.end(), {p.x, p.y, p.z});
            channel::ChannelParams cp;
            cp.distance_m = 20;
            cp.snr_db = snr;
            const auto rx = channel::transmit(flat, 3, cp, r);
            for (std::size_t i = 0; i < rx.size(); i += 3) kept += range.contains(rx[i], rx[i + 1]);
            total += c.points.size();
        }
        return static_cast<double>(kept) / static_cast<double>(total);
    };
    CHECK(surviving(-10.0) < surviving(30.0));
}

}  // TEST_SUITE

TEST_SUITE("scene_io") {

TEST_CASE("text round trip at nine significant digits") {
    Rng meta = make_stream(12, 0, 0, StreamPurpose::Scenario);
    for (int trial = 0; trial < 20; ++trial) {
        const ScenarioConfig c = small_config(meta);
        Rng r = make_stream(13, trial, 0, StreamPurpose::Scenario);
        const Scenario s = generate_scenario(c, r);
        const std::string text = scenario_to_string(s);
        std::istringstream is(text);
        const Scenario back = read_scenario(is);
        CHECK(scenario_to_string(back) == text);
        REQUIRE(back.gt_boxes.size() == s.gt_boxes.size());
        REQUIRE(back.clouds.size() == s.clouds.size());
        for (std::size_t i = 0; i < s.gt_boxes.size(); ++i) {
            CHECK(back.gt_boxes[i].center.x == doctest::Approx(s.gt_boxes[i].center.x).epsilon(1e-8));
            CHECK(back.gt_boxes[i].length == doctest::Approx(s.gt_boxes[i].length).epsilon(1e-8));
        }
        for (std::size_t a = 0; a < s.clouds.size(); ++a) CHECK(back.clouds[a].points.size() == s.clouds[a].points.size());
    }
}

TEST_CASE("malformed scenario text names the line") {
    const auto fails_at = [](const std::string& text, int line) {
        std::istringstream is(text);
        try {
            read_scenario(is);
        } catch (const ConfigError& e) {
            return e.line() == line;
        }
        return false;
    };
    CHECK(fails_at("nonsense\n", 1));
    CHECK(fails_at("coopsim-scenario 1\nego 0 0 0 0\nbox 1 2\n", 3));
    CHECK(fails_at("coopsim-scenario 1\nego 0 0 0 0\npt 4 1 1 1\n", 3));
    CHECK(fails_at("coopsim-scenario 1\nego 0 0 0 x\n", 2));
    CHECK(fails_at("coopsim-scenario 1\nego 0 0 0 0\ncav 2 1 1 0 0\n", 3));
    CHECK(fails_at("coopsim-scenario 1\nego 0 0 0 0\nbox 0 0 0 -1 1 1 0\n", 3));
    CHECK(fails_at("coopsim-scenario 1\n# comment\n\nego 0 0 0 0 9\n", 4));
}

TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/dir/scene.txt"), IoError);
}

}  // TEST_SUITE
