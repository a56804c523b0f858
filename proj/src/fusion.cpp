// SPDX-License-Identifier: Apache-2.0
#include "coopsim/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "coopsim/errors.hpp"

namespace coopsim::fusion {

using perception::FeatureMapBEV;

std::string FusionScheme::name() const {
    switch (kind) {
        case SchemeKind::Early: return "early";
        case SchemeKind::Intermediate: return "intermediate";
        case SchemeKind::Late: return "late";
        case SchemeKind::ConvFeatureLate: {
            std::string n = feature == FeatureLevel::Feature3D ? "conv3d" : "conv2d";
            return use_autoencoder ? n + "+ae" : n;
        }
    }
    return "unknown";
}

std::vector<std::string> FusionScheme::valid_names() {
    return {"early", "intermediate", "late", "conv3d", "conv2d", "conv3d+ae", "conv2d+ae"};
}

FusionScheme FusionScheme::parse(std::string_view name) {
    if (name == "early") return {SchemeKind::Early};
    if (name == "intermediate") return {SchemeKind::Intermediate};
    if (name == "late") return {SchemeKind::Late};
    if (name == "conv3d") return {SchemeKind::ConvFeatureLate, FeatureLevel::Feature3D, false};
    if (name == "conv2d") return {SchemeKind::ConvFeatureLate, FeatureLevel::Feature2D, false};
    if (name == "conv3d+ae") return {SchemeKind::ConvFeatureLate, FeatureLevel::Feature3D, true};
    if (name == "conv2d+ae") return {SchemeKind::ConvFeatureLate, FeatureLevel::Feature2D, true};
    std::string msg = "unknown fusion scheme '" + std::string(name) + "'; valid schemes:";
    for (const auto& n : valid_names()) msg += " " + n;
    throw ConfigError(msg);
}

PipelineConfig PipelineConfig::for_range(const Rect& range) {
    PipelineConfig c;
    c.range = range;
    const int min_points = c.grid.min_points;
    c.grid = perception::GridSpec::covering(range, 0.4, 0.2, 2.2, 0.4);
    c.grid.min_points = min_points;
    return c;
}

PreparedScene prepare_scene(const scene::Scenario& s, const PipelineConfig& cfg) {
    PreparedScene p;
    p.gt_boxes = s.gt_boxes;
    for (std::size_t k = 1; k <= s.num_cavs(); ++k) p.cav_distances.push_back(s.cav_distance(static_cast<int>(k)));
    for (std::size_t a = 0; a < s.clouds.size(); ++a) {
        AgentView v;
        const Pose& pose = s.pose_of(static_cast<int>(a));
        v.cloud = scene::crop_to_range(scene::transform_to_ego(s.clouds[a], pose, s.ego_pose), cfg.range);
        v.features3d = perception::voxel_features(perception::voxelize(v.cloud, cfg.grid));
        v.bev = perception::bev_collapse(v.features3d);
        v.downsampled = perception::downsample_feature(v.bev, cfg.downsample_factor);
        v.detections = perception::nms(perception::detect_head(v.bev, cfg.head), cfg.nms_iou);
        p.agents.push_back(std::move(v));
    }
    return p;
}

scene::PointCloud early_fuse(const scene::PointCloud& ego_cloud, const std::vector<scene::PointCloud>& recovered) {
    scene::PointCloud out = ego_cloud;
    out.frame = scene::kEgo;
    for (const auto& c : recovered) out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    return out;
}

FeatureMapBEV attentive_fuse(const FeatureMapBEV& ego, const std::vector<FeatureMapBEV>& cavs) {
    const std::size_t plane = static_cast<std::size_t>(ego.height) * ego.width;
    if (ego.values.size() != static_cast<std::size_t>(ego.channels) * plane)
        throw ShapeError("inconsistent ego feature map");
    for (const auto& c : cavs) {
        if (c.channels != ego.channels || c.height != ego.height || c.width != ego.width ||
            c.values.size() != ego.values.size() || c.origin_x != ego.origin_x || c.origin_y != ego.origin_y ||
            c.cell != ego.cell)
            throw ShapeError("CAV feature map does not match the ego map");
    }
    FeatureMapBEV out = ego;
    if (cavs.empty()) return out;

    const int C = ego.channels;
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(C));
    const std::size_t A = cavs.size() + 1;
    std::vector<std::vector<double>> vec(A, std::vector<double>(static_cast<std::size_t>(C)));
    std::vector<std::size_t> order(A);
    std::vector<double> logit(A), weight(A);

    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < C; ++c) {
            vec[0][c] = ego.values[c * plane + i];
            for (std::size_t k = 0; k < cavs.size(); ++k) vec[k + 1][c] = cavs[k].values[c * plane + i];
        }
        // canonical summation order makes the result independent of CAV numbering
        for (std::size_t a = 0; a < A; ++a) order[a] = a;
        std::sort(order.begin() + 1, order.end(),
                  [&](std::size_t x, std::size_t y) { return vec[x] < vec[y]; });
        double top = -1e300;
        for (std::size_t a = 0; a < A; ++a) {
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += vec[0][c] * vec[order[a]][c];
            logit[a] = dot * inv_sqrt_c;
            top = std::max(top, logit[a]);
        }
        double z = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
            weight[a] = std::exp(logit[a] - top);
            z += weight[a];
        }
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t a = 0; a < A; ++a) acc += weight[a] / z * vec[order[a]][c];
            out.values[c * plane + i] = acc;
        }
    }
    return out;
}

std::vector<Detection> late_fuse(const std::vector<Detection>& ego_dets,
                                 const std::vector<std::vector<Detection>>& recovered, double iou_thresh,
                                 const Rect& range) {
    std::vector<Detection> pool = ego_dets;
    for (const auto& r : recovered) pool.insert(pool.end(), r.begin(), r.end());
    return perception::nms(perception::crop_to_range(pool, range), iou_thresh);
}

std::vector<Detection> conv_feature_late_fuse(const FeatureMapBEV& ego, const std::vector<FeatureMapBEV>& recovered,
                                              const PipelineConfig& cfg) {
    const auto ego_dets = perception::detect_head(ego, cfg.head);
    std::vector<std::vector<Detection>> cav_dets;
    for (const auto& f : recovered) cav_dets.push_back(perception::detect_head(f, cfg.cav_head));
    return late_fuse(ego_dets, cav_dets, cfg.nms_iou, cfg.range);
}

std::vector<double> serialize_detections(const std::vector<Detection>& dets) {
    std::vector<double> v;
    v.reserve(dets.size() * 8);
    for (const auto& d : dets) {
        const auto& b = d.box;
        v.insert(v.end(), {b.center.x, b.center.y, b.center.z, b.length, b.width, b.height, b.yaw, d.score});
    }
    return v;
}

std::vector<Detection> deserialize_detections(const std::vector<double>& v, std::size_t* rejected) {
    if (v.size() % 8 != 0) throw ShapeError("detection records must have 8 fields");
    // 1e-9 grid so link round-off cannot reorder exact ranking ties
    const auto snap = [](double x) { return std::round(x * 1e9) / 1e9; };
    std::vector<Detection> out;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < v.size(); i += 8) {
        bool finite = true;
        for (std::size_t j = 0; j < 8; ++j) finite = finite && std::isfinite(v[i + j]);
        const double l = snap(std::abs(v[i + 3])), w = snap(std::abs(v[i + 4])), h = snap(std::abs(v[i + 5]));
        if (!finite || !(l > 0.0) || !(w > 0.0) || !(h > 0.0)) {
            ++bad;
            continue;
        }
        Detection d;
        d.box = BoxLabel::make({snap(v[i]), snap(v[i + 1]), snap(v[i + 2])}, l, w, h, snap(v[i + 6]));
        d.score = snap(std::clamp(v[i + 7], 0.0, 1.0));
        out.push_back(d);
    }
    if (rejected) *rejected = bad;
    return out;
}

namespace {

struct Sender {
    const std::optional<channel::ChannelParams>& link;
    const LinkSeed& seed;
    const PreparedScene& prepared;

    // Returns nullopt when the CAV has to be dropped for this frame.
    std::optional<std::vector<double>> send(int agent, const std::vector<double>& values, std::size_t arity,
                                            CavDiagnostics& diag) const {
        diag.transmitted_reals += values.size();
        if (!link || values.empty()) return values;
        channel::ChannelParams params = *link;
        params.distance_m = prepared.cav_distances.at(static_cast<std::size_t>(agent - 1));
        Rng rng = make_stream(derive_seed({seed.master_seed, seed.run_seed}), seed.frame_id,
                              static_cast<std::uint64_t>(agent), StreamPurpose::Link);
        channel::LinkReport report;
        try {
            auto out = channel::transmit(values, arity, params, rng, &report);
            diag.rms_error = report.rms_error;
            return out;
        } catch (const EqualizationError& e) {
            diag.dropped = true;
            diag.reason = e.what();
            return std::nullopt;
        }
    }
};

std::vector<double> flatten(const std::vector<Point3>& pts) {
    std::vector<double> v;
    v.reserve(pts.size() * 3);
    for (const auto& p : pts) v.insert(v.end(), {p.x, p.y, p.z});
    return v;
}

}  // namespace

FrameResult run_pipeline(const PreparedScene& prepared, const FusionScheme& scheme,
                         const std::optional<channel::ChannelParams>& link, const LinkSeed& seed,
                         const PipelineConfig& cfg) {
    if (prepared.agents.empty()) throw ShapeError("prepared scene has no ego agent");
    if (link) link->validate();
    const Sender sender{link, seed, prepared};
    const AgentView& ego = prepared.agents[0];
    const int K = static_cast<int>(prepared.agents.size()) - 1;
    FrameResult result;

    switch (scheme.kind) {
        case SchemeKind::Early: {
            std::vector<scene::PointCloud> recovered;
            for (int k = 1; k <= K; ++k) {
                CavDiagnostics diag;
                diag.agent = k;
                const auto& pts = prepared.agents[k].cloud.points;
                if (auto got = sender.send(k, flatten(pts), 3, diag)) {
                    scene::PointCloud c;
                    for (std::size_t i = 0; i + 2 < got->size(); i += 3)
                        c.points.push_back({(*got)[i], (*got)[i + 1], (*got)[i + 2]});
                    recovered.push_back(scene::crop_to_range(c, cfg.range));
                }
                result.cavs.push_back(diag);
            }
            const auto fused = early_fuse(ego.cloud, recovered);
            const auto bev =
                perception::bev_collapse(perception::voxel_features(perception::voxelize(fused, cfg.grid)));
            result.detections = perception::nms(perception::detect_head(bev, cfg.head), cfg.nms_iou);
            break;
        }
        case SchemeKind::Intermediate: {
            std::vector<FeatureMapBEV> maps;
            for (int k = 1; k <= K; ++k) {
                CavDiagnostics diag;
                diag.agent = k;
                const auto& f = prepared.agents[k].downsampled;
                const codec::Tensor t = codec::to_tensor(f);
                if (auto got = sender.send(k, codec::interleave(t), static_cast<std::size_t>(t.channels), diag))
                    maps.push_back(codec::to_bev(codec::deinterleave(*got, t.channels, t.height, t.width), f));
                result.cavs.push_back(diag);
            }
            const auto fused = attentive_fuse(ego.downsampled, maps);
            result.detections = perception::nms(perception::detect_head(fused, cfg.fused_head), cfg.nms_iou);
            break;
        }
        case SchemeKind::Late: {
            std::vector<std::vector<Detection>> recovered;
            for (int k = 1; k <= K; ++k) {
                CavDiagnostics diag;
                diag.agent = k;
                const auto& dets = prepared.agents[k].detections;
                if (auto got = sender.send(k, serialize_detections(dets), 8, diag))
                    recovered.push_back(deserialize_detections(*got));
                result.cavs.push_back(diag);
            }
            result.detections = late_fuse(ego.detections, recovered, cfg.nms_iou, cfg.range);
            break;
        }
        case SchemeKind::ConvFeatureLate: {
            const bool is3d = scheme.feature == FeatureLevel::Feature3D;
            const codec::AEParams* ae = is3d ? cfg.codec3d : cfg.codec2d;
            if (scheme.use_autoencoder && !ae)
                throw ConfigError("scheme " + scheme.name() + " needs trained codec parameters");
            std::vector<FeatureMapBEV> maps;
            for (int k = 1; k <= K; ++k) {
                CavDiagnostics diag;
                diag.agent = k;
                const AgentView& v = prepared.agents[k];
                codec::Tensor t = is3d ? codec::to_tensor(v.features3d) : codec::to_tensor(v.bev);
                if (scheme.use_autoencoder) t = codec::ae_encode(t, *ae);
                if (auto got = sender.send(k, codec::interleave(t), static_cast<std::size_t>(t.channels), diag)) {
                    codec::Tensor r = codec::deinterleave(*got, t.channels, t.height, t.width);
                    if (scheme.use_autoencoder) r = codec::ae_decode(r, *ae);
                    maps.push_back(is3d ? perception::bev_collapse(codec::to_3d(r, v.features3d))
                                        : codec::to_bev(r, v.bev));
                }
                result.cavs.push_back(diag);
            }
            result.detections = conv_feature_late_fuse(ego.bev, maps, cfg);
            break;
        }
    }
    return result;
}

FrameResult run_pipeline(const scene::Scenario& s, const FusionScheme& scheme,
                         const std::optional<channel::ChannelParams>& link, const LinkSeed& seed,
                         const PipelineConfig& cfg) {
    return run_pipeline(prepare_scene(s, cfg), scheme, link, seed, cfg);
}

std::vector<Detection> ego_only(const PreparedScene& prepared, const PipelineConfig&) {
    if (prepared.agents.empty()) throw ShapeError("prepared scene has no ego agent");
    return prepared.agents[0].detections;
}

}  // namespace coopsim::fusion
