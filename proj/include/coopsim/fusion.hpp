// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopsim/channel.hpp"
#include "coopsim/codec.hpp"
#include "coopsim/perception.hpp"
#include "coopsim/scene.hpp"

namespace coopsim::fusion {

using perception::Detection;

enum class SchemeKind { Early, Intermediate, Late, ConvFeatureLate };
enum class FeatureLevel { Feature3D, Feature2D };

struct FusionScheme {
    SchemeKind kind = SchemeKind::Early;
    FeatureLevel feature = FeatureLevel::Feature3D;  ///< ConvFeatureLate only
    bool use_autoencoder = false;                    ///< ConvFeatureLate only

    /// early | intermediate | late | conv3d | conv2d, with "+ae" for the codec variants.
    std::string name() const;
    /// Throws ConfigError listing the valid names.
    static FusionScheme parse(std::string_view name);
    static std::vector<std::string> valid_names();

    friend bool operator==(const FusionScheme&, const FusionScheme&) = default;
};

struct PipelineConfig {
    Rect range;
    /// Voxels with fewer than 6 points are ignored to suppress stray returns.
    perception::GridSpec grid = [] {
        auto g = perception::GridSpec::covering(Rect{}, 0.4, 0.2, 2.2, 0.4);
        g.min_points = 6;
        return g;
    }();
    /// Head for full-resolution maps (single agent, early fusion), scored on column occupancy.
    perception::DetectorConfig head{0.15, 3, 0.8, 1.6, 0.5, perception::kOccupancy};
    /// Head for attention-fused maps.
    perception::DetectorConfig fused_head{0.3, 3, 0.8, 1.6, 0.5, perception::kOccupancy};
    /// Head applied at the ego to each CAV's recovered conv features, scored on height fraction.
    perception::DetectorConfig cav_head{0.15, 3, 0.8, 1.6, 0.5, -1};
    int downsample_factor = 2;
    double nms_iou = 0.1;
    /// Codecs for the conv-feature schemes; required only by "+ae" variants.
    const codec::AEParams* codec3d = nullptr;
    const codec::AEParams* codec2d = nullptr;

    /// Grid covering `range` with the default cell sizes and height band.
    static PipelineConfig for_range(const Rect& range);
};

/// What one agent senses and computes locally, expressed in the ego frame.
struct AgentView {
    scene::PointCloud cloud;  ///< transformed and cropped to the detection range
    perception::FeatureMap3D features3d;
    perception::FeatureMapBEV bev;
    perception::FeatureMapBEV downsampled;
    std::vector<Detection> detections;
};

struct PreparedScene {
    std::vector<AgentView> agents;  ///< [0] ego, [k] CAV k
    std::vector<double> cav_distances;
    std::vector<BoxLabel> gt_boxes;
};

PreparedScene prepare_scene(const scene::Scenario& s, const PipelineConfig& cfg);

struct CavDiagnostics {
    int agent = 0;
    bool dropped = false;
    std::string reason;
    double rms_error = 0.0;  ///< normalized payload units
    std::size_t transmitted_reals = 0;
};

struct FrameResult {
    std::vector<Detection> detections;
    std::vector<CavDiagnostics> cavs;
};

/// Seeds of one frame's links; each CAV draws from its own derived stream.
struct LinkSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t run_seed = 0;
    std::uint64_t frame_id = 0;
};

scene::PointCloud early_fuse(const scene::PointCloud& ego_cloud, const std::vector<scene::PointCloud>& recovered);

/// Scaled dot-product attention per cell with the ego vector as query and
/// identity projections. Throws ShapeError on mismatched maps.
perception::FeatureMapBEV attentive_fuse(const perception::FeatureMapBEV& ego,
                                         const std::vector<perception::FeatureMapBEV>& cavs);

std::vector<Detection> late_fuse(const std::vector<Detection>& ego_dets,
                                 const std::vector<std::vector<Detection>>& recovered, double iou_thresh,
                                 const Rect& range);

std::vector<Detection> conv_feature_late_fuse(const perception::FeatureMapBEV& ego,
                                              const std::vector<perception::FeatureMapBEV>& recovered,
                                              const PipelineConfig& cfg);

/// Box (x, y, z, l, w, h, yaw, score) records for late-fusion transport.
std::vector<double> serialize_detections(const std::vector<Detection>& dets);
/// Sizes are read as magnitudes; records with non-finite fields or zero sizes are
/// dropped. Scores are clamped to [0, 1]; all fields are rounded to a 1e-9 grid.
std::vector<Detection> deserialize_detections(const std::vector<double>& v, std::size_t* rejected = nullptr);

/// Runs one frame. With `link` unset, shared data is handed over untouched.
FrameResult run_pipeline(const PreparedScene& prepared, const FusionScheme& scheme,
                         const std::optional<channel::ChannelParams>& link, const LinkSeed& seed,
                         const PipelineConfig& cfg);

FrameResult run_pipeline(const scene::Scenario& s, const FusionScheme& scheme,
                         const std::optional<channel::ChannelParams>& link, const LinkSeed& seed,
                         const PipelineConfig& cfg);

/// Ego-only detections of a prepared frame.
std::vector<Detection> ego_only(const PreparedScene& prepared, const PipelineConfig& cfg);

}  // namespace coopsim::fusion
