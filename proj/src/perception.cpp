// SPDX-License-Identifier: Apache-2.0
#include "coopsim/perception.hpp"

#include <algorithm>
#include <cmath>

#include "coopsim/errors.hpp"

namespace coopsim::perception {

GridSpec GridSpec::covering(const Rect& range, double cell_xy, double z_min, double z_max,
                            double cell_z, int multiple) {
    if (!(cell_xy > 0.0) || !(cell_z > 0.0) || !(z_max > z_min) || multiple < 1)
        throw DomainError("invalid grid specification");
    const auto cells = [&](double extent) {
        const int n = static_cast<int>(std::ceil(extent / cell_xy - 1e-9));
        return (n + multiple - 1) / multiple * multiple;
    };
    GridSpec g;
    g.cell_xy = cell_xy;
    g.cell_z = cell_z;
    g.width = cells(range.width());
    g.height = cells(range.height());
    g.depth = static_cast<int>(std::ceil((z_max - z_min) / cell_z - 1e-9));
    g.x_min = 0.5 * (range.x_min + range.x_max) - 0.5 * g.width * cell_xy;
    g.y_min = 0.5 * (range.y_min + range.y_max) - 0.5 * g.height * cell_xy;
    g.z_min = z_min;
    return g;
}

void GridSpec::validate() const {
    if (!(cell_xy > 0.0) || !(cell_z > 0.0) || width <= 0 || height <= 0 || depth <= 0 || min_points < 1)
        throw DomainError("grid cells and dimensions must be positive");
}

VoxelGrid voxelize(const scene::PointCloud& cloud, const GridSpec& spec) {
    spec.validate();
    VoxelGrid g;
    g.spec = spec;
    g.count.assign(spec.voxels(), 0);
    g.sum_dx.assign(spec.voxels(), 0.0);
    g.sum_dy.assign(spec.voxels(), 0.0);
    g.sum_dz.assign(spec.voxels(), 0.0);
    for (const auto& p : cloud.points) {
        const double fx = (p.x - spec.x_min) / spec.cell_xy;
        const double fy = (p.y - spec.y_min) / spec.cell_xy;
        const double fz = (p.z - spec.z_min) / spec.cell_z;
        if (!(fx >= 0.0 && fx < spec.width && fy >= 0.0 && fy < spec.height && fz >= 0.0 &&
              fz < spec.depth))
            continue;
        const int w = static_cast<int>(fx), h = static_cast<int>(fy), d = static_cast<int>(fz);
        const std::size_t i = g.index(d, h, w);
        g.count[i] += 1;
        g.sum_dx[i] += fx - (w + 0.5);
        g.sum_dy[i] += fy - (h + 0.5);
        g.sum_dz[i] += fz - (d + 0.5);
    }
    return g;
}

FeatureMap3D voxel_features(const VoxelGrid& grid) {
    const GridSpec& s = grid.spec;
    FeatureMap3D f;
    f.channels = kVoxelChannels;
    f.depth = s.depth;
    f.height = s.height;
    f.width = s.width;
    f.geo = s;
    f.values.assign(static_cast<std::size_t>(kVoxelChannels) * s.voxels(), 0.0);
    const std::size_t n = s.voxels();
    for (std::size_t i = 0; i < n; ++i) {
        const int c = grid.count[i];
        if (c == 0 || c < s.min_points) continue;
        const double inv = 1.0 / c;
        f.values[kLogCount * n + i] = std::log1p(static_cast<double>(c));
        f.values[kOffsetX * n + i] = grid.sum_dx[i] * inv;
        f.values[kOffsetY * n + i] = grid.sum_dy[i] * inv;
        f.values[kOffsetZ * n + i] = grid.sum_dz[i] * inv;
        f.values[kOccupancy * n + i] = 1.0;
    }
    return f;
}

FeatureMapBEV bev_collapse(const FeatureMap3D& f3d) {
    if (f3d.channels <= 0 || f3d.depth <= 0 ||
        f3d.values.size() != static_cast<std::size_t>(f3d.channels) * f3d.depth * f3d.height * f3d.width)
        throw ShapeError("inconsistent 3D feature map");
    FeatureMapBEV b;
    b.channels = f3d.channels + 1;
    b.height = f3d.height;
    b.width = f3d.width;
    b.origin_x = f3d.geo.x_min;
    b.origin_y = f3d.geo.y_min;
    b.cell = f3d.geo.cell_xy;
    const std::size_t plane = static_cast<std::size_t>(f3d.height) * f3d.width;
    b.values.assign(static_cast<std::size_t>(b.channels) * plane, 0.0);
    for (int c = 0; c < f3d.channels; ++c) {
        double* out = b.values.data() + c * plane;
        const double* in = f3d.values.data() + static_cast<std::size_t>(c) * f3d.depth * plane;
        std::copy(in, in + plane, out);
        for (int d = 1; d < f3d.depth; ++d) {
            const double* layer = in + d * plane;
            for (std::size_t i = 0; i < plane; ++i) out[i] = std::max(out[i], layer[i]);
        }
    }
    // fraction of height cells whose occupancy indicator is set
    if (f3d.channels > kOccupancy) {
        double* frac = b.values.data() + static_cast<std::size_t>(f3d.channels) * plane;
        const double* occ = f3d.values.data() + static_cast<std::size_t>(kOccupancy) * f3d.depth * plane;
        for (int d = 0; d < f3d.depth; ++d)
            for (std::size_t i = 0; i < plane; ++i)
                if (occ[d * plane + i] >= 0.5) frac[i] += 1.0;
        for (std::size_t i = 0; i < plane; ++i) frac[i] /= f3d.depth;
    }
    return b;
}

FeatureMapBEV downsample_feature(const FeatureMapBEV& f, int factor) {
    if (factor < 1 || f.height % factor != 0 || f.width % factor != 0)
        throw ShapeError("downsampling factor must divide the map dimensions");
    FeatureMapBEV out;
    out.channels = f.channels;
    out.height = f.height / factor;
    out.width = f.width / factor;
    out.origin_x = f.origin_x;
    out.origin_y = f.origin_y;
    out.cell = f.cell * factor;
    out.values.assign(static_cast<std::size_t>(out.channels) * out.height * out.width, 0.0);
    const double inv = 1.0 / (factor * factor);
    for (int c = 0; c < f.channels; ++c)
        for (int h = 0; h < out.height; ++h)
            for (int w = 0; w < out.width; ++w) {
                double s = 0.0;
                for (int i = 0; i < factor; ++i)
                    for (int j = 0; j < factor; ++j) s += f.at(c, h * factor + i, w * factor + j);
                out.at(c, h, w) = s * inv;
            }
    return out;
}

std::vector<Detection> detect_head(const FeatureMapBEV& f, const DetectorConfig& cfg) {
    std::vector<Detection> dets;
    if (f.channels <= 0 || f.height <= 0 || f.width <= 0) return dets;
    const int ch = cfg.occupancy_channel < 0 ? f.channels + cfg.occupancy_channel : cfg.occupancy_channel;
    if (ch < 0 || ch >= f.channels) throw ShapeError("occupancy channel out of range");
    const int H = f.height, W = f.width;
    const double* occ = f.values.data() + static_cast<std::size_t>(ch) * H * W;

    std::vector<int> label(static_cast<std::size_t>(H) * W, -1);
    std::vector<int> stack, cells;
    int next = 0;
    for (int start = 0; start < H * W; ++start) {
        if (label[start] >= 0 || !(occ[start] >= cfg.threshold)) continue;
        cells.clear();
        stack.assign(1, start);
        label[start] = next;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            cells.push_back(i);
            const int h = i / W, w = i % W;
            for (int dh = -1; dh <= 1; ++dh)
                for (int dw = -1; dw <= 1; ++dw) {
                    const int nh = h + dh, nw = w + dw;
                    if (nh < 0 || nh >= H || nw < 0 || nw >= W) continue;
                    const int j = nh * W + nw;
                    if (label[j] >= 0 || !(occ[j] >= cfg.threshold)) continue;
                    label[j] = next;
                    stack.push_back(j);
                }
        }
        ++next;
        if (static_cast<int>(cells.size()) < cfg.min_cells) continue;

        std::vector<Vec2> corners;
        corners.reserve(cells.size() * 4);
        double score = 0.0;
        for (int i : cells) {
            const double x0 = f.origin_x + (i % W) * f.cell, y0 = f.origin_y + (i / W) * f.cell;
            corners.push_back({x0, y0});
            corners.push_back({x0 + f.cell, y0});
            corners.push_back({x0, y0 + f.cell});
            corners.push_back({x0 + f.cell, y0 + f.cell});
            score += occ[i];
        }
        score = std::clamp(score / static_cast<double>(cells.size()), 0.0, 1.0);
        const OrientedRect r = min_area_rect(convex_hull(std::move(corners)));
        const double inset = 2.0 * cfg.hull_inset_cells * f.cell;
        const double floor_dim = 0.25 * f.cell;
        Detection d;
        d.box = BoxLabel::make({r.center.x, r.center.y, cfg.box_z}, std::max(r.length - inset, floor_dim),
                               std::max(r.width - inset, floor_dim), cfg.box_height, r.yaw);
        d.score = score;
        dets.push_back(d);
    }
    return dets;
}

double rotated_iou_bev(const BoxLabel& a, const BoxLabel& b) {
    const auto ca = a.corners();
    const auto cb = b.corners();
    const std::vector<Vec2> pa(ca.begin(), ca.end()), pb(cb.begin(), cb.end());
    const double area_a = a.length * a.width, area_b = b.length * b.width;
    const auto inter_poly = clip_convex(pa, pb);
    if (inter_poly.size() < 3) return 0.0;
    const double inter = std::abs(polygon_area(inter_poly));
    const double uni = area_a + area_b - inter;
    if (!(inter > 0.0) || !(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool ranks_before(const Detection& a, const Detection& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
    return a.box.center.y < b.box.center.y;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
    if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) throw DomainError("NMS threshold must be in [0, 1]");
    std::stable_sort(dets.begin(), dets.end(), ranks_before);
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (rotated_iou_bev(d.box, k.box) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> crop_to_range(const std::vector<Detection>& dets, const Rect& range) {
    std::vector<Detection> out;
    for (const auto& d : dets)
        if (range.contains(d.box.center.x, d.box.center.y)) out.push_back(d);
    return out;
}

}  // namespace coopsim::perception
