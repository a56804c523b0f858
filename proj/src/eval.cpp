// SPDX-License-Identifier: Apache-2.0
#include "coopsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "coopsim/errors.hpp"

namespace coopsim::eval {

namespace {

bool entry_before(const MatchEntry& a, const MatchEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
}

}  // namespace

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<BoxLabel>& gts,
                             double iou_thresh) {
    std::vector<Detection> ranked = dets;
    std::stable_sort(ranked.begin(), ranked.end(), perception::ranks_before);
    MatchResult m;
    m.num_gt = gts.size();
    std::vector<bool> taken(gts.size(), false);
    for (const auto& d : ranked) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double iou = perception::rotated_iou_bev(d.box, gts[g]);
            if (iou >= iou_thresh && iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
        m.entries.push_back({d.score, best >= 0, best, d.box.center.x, d.box.center.y});
    }
    return m;
}

MatchResult pool(const std::vector<MatchResult>& frames) {
    MatchResult out;
    for (const auto& f : frames) {
        out.num_gt += f.num_gt;
        out.entries.insert(out.entries.end(), f.entries.begin(), f.entries.end());
    }
    std::stable_sort(out.entries.begin(), out.entries.end(), entry_before);
    return out;
}

std::vector<PrPoint> precision_recall_curve(const MatchResult& m) {
    if (m.num_gt == 0) throw DomainError("recall is undefined without ground truth");
    std::vector<PrPoint> curve;
    curve.reserve(m.entries.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        if (m.entries[i].true_positive) ++tp;
        curve.push_back({static_cast<double>(tp) / static_cast<double>(m.num_gt),
                         static_cast<double>(tp) / static_cast<double>(i + 1)});
    }
    return curve;
}

double average_precision(const std::vector<PrPoint>& curve) {
    if (curve.empty()) return 0.0;
    std::vector<double> env(curve.size());
    double run = 0.0;
    for (std::size_t i = curve.size(); i-- > 0;) {
        run = std::max(run, curve[i].precision);
        env[i] = run;
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        ap += (curve[i].recall - prev_recall) * env[i];
        prev_recall = curve[i].recall;
    }
    return std::clamp(ap, 0.0, 1.0);
}

double average_precision(const MatchResult& m) {
    if (m.entries.empty() || m.num_gt == 0) return 0.0;
    return average_precision(precision_recall_curve(m));
}

void SweepSpec::validate() const {
    if (schemes.empty() || snr_grid.empty() || n_grid.empty() || iou_grid.empty() || seeds.empty())
        throw ConfigError("sweep grids must be non-empty");
    for (double t : iou_grid)
        if (!(t > 0.0 && t <= 1.0)) throw ConfigError("IoU thresholds must lie in (0, 1]");
    for (double n : n_grid)
        if (!(n >= 0.0)) throw ConfigError("path-loss factors must be non-negative");
    base.validate();
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

SweepResult sweep(const std::vector<scene::Scenario>& scenes, const SweepSpec& spec,
                  const fusion::PipelineConfig& cfg) {
    spec.validate();
    if (scenes.empty()) throw ConfigError("sweep needs at least one scene");

    // index of every (scheme, snr, n, seed) link configuration
    struct Point {
        std::size_t scheme, snr, n, seed;
    };
    std::vector<Point> points;
    for (std::size_t a = 0; a < spec.schemes.size(); ++a)
        for (std::size_t b = 0; b < spec.snr_grid.size(); ++b)
            for (std::size_t c = 0; c < spec.n_grid.size(); ++c)
                for (std::size_t d = 0; d < spec.seeds.size(); ++d) points.push_back({a, b, c, d});
    const std::size_t I = spec.iou_grid.size();

    struct Cell {
        MatchResult match;
        double rms_sum = 0.0;
        std::size_t rms_count = 0;
        std::size_t frames = 0;
    };
    // per scene, per point, per iou
    std::vector<std::vector<Cell>> per_scene(scenes.size(), std::vector<Cell>(points.size() * I));
    std::vector<std::vector<std::string>> diags(scenes.size());

    std::mutex next_mutex;
    std::size_t next = 0;
    const auto worker = [&]() {
        for (;;) {
            std::size_t f;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= scenes.size()) return;
                f = next++;
            }
            const auto prepared = fusion::prepare_scene(scenes[f], cfg);
            for (std::size_t p = 0; p < points.size(); ++p) {
                const Point& pt = points[p];
                channel::ChannelParams link = spec.base;
                link.snr_db = spec.snr_grid[pt.snr];
                link.path_loss_factor = spec.n_grid[pt.n];
                const fusion::LinkSeed seed{spec.master_seed, spec.seeds[pt.seed], f};
                fusion::FrameResult r;
                try {
                    r = fusion::run_pipeline(prepared, spec.schemes[pt.scheme], link, seed, cfg);
                } catch (const std::exception& e) {
                    diags[f].push_back("frame " + std::to_string(f) + " excluded for " +
                                       spec.schemes[pt.scheme].name() + ": " + e.what());
                    continue;
                }
                double rms = 0.0;
                std::size_t n_rms = 0;
                for (const auto& c : r.cavs) {
                    if (c.dropped) {
                        diags[f].push_back("frame " + std::to_string(f) + " dropped CAV " + std::to_string(c.agent) +
                                           " (" + spec.schemes[pt.scheme].name() + "): " + c.reason);
                    } else if (c.transmitted_reals > 0) {
                        rms += c.rms_error;
                        ++n_rms;
                    }
                }
                for (std::size_t i = 0; i < I; ++i) {
                    Cell& cell = per_scene[f][p * I + i];
                    cell.match = match_detections(r.detections, prepared.gt_boxes, spec.iou_grid[i]);
                    cell.rms_sum = rms;
                    cell.rms_count = n_rms;
                    cell.frames = 1;
                }
            }
        }
    };
    const int jobs = std::max(1, spec.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    SweepResult result;
    for (const auto& d : diags) result.diagnostics.insert(result.diagnostics.end(), d.begin(), d.end());
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (std::size_t i = 0; i < I; ++i) {
            std::vector<MatchResult> frames;
            double rms = 0.0;
            std::size_t n_rms = 0, n_frames = 0;
            for (std::size_t f = 0; f < scenes.size(); ++f) {
                const Cell& c = per_scene[f][p * I + i];
                if (c.frames == 0) continue;
                frames.push_back(c.match);
                rms += c.rms_sum;
                n_rms += c.rms_count;
                n_frames += c.frames;
            }
            const Point& pt = points[p];
            SweepRow row;
            row.scheme = spec.schemes[pt.scheme].name();
            row.snr_db = spec.snr_grid[pt.snr];
            row.path_loss_factor = spec.n_grid[pt.n];
            row.iou_thresh = spec.iou_grid[i];
            row.seed = spec.seeds[pt.seed];
            row.ap = average_precision(pool(frames));
            row.mean_rms = n_rms ? rms / static_cast<double>(n_rms) : 0.0;
            row.frames = n_frames;
            result.rows.push_back(row);
        }
    }
    return result;
}

void write_csv(std::ostream& os, const SweepResult& r) {
    os << kSweepHeader << '\n';
    for (const auto& row : r.rows) {
        char ap[32], rms[32];
        std::snprintf(ap, sizeof ap, "%.6f", row.ap);
        std::snprintf(rms, sizeof rms, "%.6f", row.mean_rms);
        os << row.scheme << ',' << format_number(row.snr_db) << ',' << format_number(row.path_loss_factor) << ','
           << format_number(row.iou_thresh) << ',' << row.seed << ',' << ap << ',' << rms << ',' << row.frames
           << '\n';
    }
}

}  // namespace coopsim::eval
