// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "coopsim/geometry.hpp"
#include "coopsim/scene.hpp"

namespace coopsim::perception {

/// Georeferenced voxel lattice in the ego frame. Cell (d, h, w) spans
/// x in [x_min + w*cell_xy, ...), y in [y_min + h*cell_xy, ...), z likewise.
struct GridSpec {
    double x_min = -51.2;
    double y_min = -25.6;
    double z_min = 0.2;
    double cell_xy = 0.4;
    double cell_z = 0.4;
    int width = 256;   ///< cells along x
    int height = 128;  ///< cells along y
    int depth = 5;     ///< cells along z
    /// Voxels holding fewer points than this are treated as empty.
    int min_points = 1;

    /// Smallest grid centred on `range` whose x/y cell counts are multiples of `multiple`.
    static GridSpec covering(const Rect& range, double cell_xy, double z_min, double z_max,
                             double cell_z, int multiple = 8);

    std::size_t columns() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::size_t voxels() const noexcept { return columns() * depth; }
    void validate() const;
};

struct VoxelGrid {
    GridSpec spec;
    std::vector<int> count;
    /// Sums of point offsets from the voxel centre, in cell units.
    std::vector<double> sum_dx, sum_dy, sum_dz;

    std::size_t index(int d, int h, int w) const noexcept {
        return (static_cast<std::size_t>(d) * spec.height + h) * spec.width + w;
    }
};

/// Dense C x D x H x W tensor, channel-major.
struct FeatureMap3D {
    int channels = 0, depth = 0, height = 0, width = 0;
    std::vector<double> values;
    GridSpec geo;

    std::size_t size() const noexcept { return values.size(); }
    double& at(int c, int d, int h, int w) {
        return values[((static_cast<std::size_t>(c) * depth + d) * height + h) * width + w];
    }
    double at(int c, int d, int h, int w) const {
        return values[((static_cast<std::size_t>(c) * depth + d) * height + h) * width + w];
    }
};

/// Dense C x H x W tensor with its ground-plane georeference.
struct FeatureMapBEV {
    int channels = 0, height = 0, width = 0;
    std::vector<double> values;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cell = 0.4;

    std::size_t size() const noexcept { return values.size(); }
    double& at(int c, int h, int w) {
        return values[(static_cast<std::size_t>(c) * height + h) * width + w];
    }
    double at(int c, int h, int w) const {
        return values[(static_cast<std::size_t>(c) * height + h) * width + w];
    }
};

/// Voxel feature channels.
enum VoxelChannel : int { kLogCount = 0, kOffsetX, kOffsetY, kOffsetZ, kOccupancy, kVoxelChannels };
/// BEV maps carry the voxel channels plus the occupied-height fraction.
inline constexpr int kHeightFraction = kVoxelChannels;
inline constexpr int kBevChannels = kVoxelChannels + 1;

struct Detection {
    BoxLabel box;
    double score = 0.0;
};

struct DetectorConfig {
    /// Threshold on the occupancy channel.
    double threshold = 0.29;
    int min_cells = 3;
    double box_z = 0.8;
    double box_height = 1.6;
    /// The cell-corner hull overshoots a surface by about half a cell per side;
    /// the fitted rectangle is shrunk by this many cells on every side.
    double hull_inset_cells = 0.5;
    /// Channel thresholded by the head; negative counts from the end.
    int occupancy_channel = -1;
};

VoxelGrid voxelize(const scene::PointCloud& cloud, const GridSpec& spec);
FeatureMap3D voxel_features(const VoxelGrid& grid);
FeatureMapBEV bev_collapse(const FeatureMap3D& f3d);
FeatureMapBEV downsample_feature(const FeatureMapBEV& f, int factor);
std::vector<Detection> detect_head(const FeatureMapBEV& f, const DetectorConfig& cfg);

double rotated_iou_bev(const BoxLabel& a, const BoxLabel& b);

/// Total order used for NMS and matching: score descending, then centre x, then y.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

/// Keeps detections whose box centre lies in the range.
std::vector<Detection> crop_to_range(const std::vector<Detection>& dets, const Rect& range);

}  // namespace coopsim::perception
