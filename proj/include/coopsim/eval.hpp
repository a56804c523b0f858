// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "coopsim/channel.hpp"
#include "coopsim/fusion.hpp"
#include "coopsim/perception.hpp"
#include "coopsim/scene.hpp"

namespace coopsim::eval {

using perception::Detection;

struct MatchEntry {
    double score = 0.0;
    bool true_positive = false;
    int gt_index = -1;  ///< matched ground truth, -1 for false positives
    double x = 0.0, y = 0.0;
};

/// Entries are in ranking order (see perception::ranks_before).
struct MatchResult {
    std::vector<MatchEntry> entries;
    std::size_t num_gt = 0;
};

/// Greedy: each detection, best first, takes the highest-IoU unmatched gt with IoU >= thresh.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<BoxLabel>& gts,
                             double iou_thresh);

/// Pools several frames into one ranking (gt indices stay per frame).
MatchResult pool(const std::vector<MatchResult>& frames);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

/// Cumulative precision/recall in ranking order. Throws DomainError when there is no ground truth.
std::vector<PrPoint> precision_recall_curve(const MatchResult& m);

/// Area under the monotone precision envelope (all-point interpolation).
double average_precision(const std::vector<PrPoint>& curve);

/// AP of a match result, 0 for an empty ranking.
double average_precision(const MatchResult& m);

struct SweepSpec {
    std::vector<fusion::FusionScheme> schemes;
    std::vector<double> snr_grid{-10, -5, 0, 5, 10, 15, 20, 25, 30};
    std::vector<double> n_grid{1.0, 1.5, 2.0, 2.5, 3.0};
    std::vector<double> iou_grid{0.3, 0.7};
    std::vector<std::uint64_t> seeds{1};
    /// Template link; distance comes from each scene, SNR and n from the grid.
    channel::ChannelParams base;
    std::uint64_t master_seed = 0;
    int jobs = 1;

    void validate() const;
};

struct SweepRow {
    std::string scheme;
    double snr_db = 0.0;
    double path_loss_factor = 0.0;
    double iou_thresh = 0.0;
    std::uint64_t seed = 0;
    double ap = 0.0;
    double mean_rms = 0.0;
    std::size_t frames = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> diagnostics;
};

/// AP pooled over all scenes per (scheme, snr, n, iou, seed).
SweepResult sweep(const std::vector<scene::Scenario>& scenes, const SweepSpec& spec,
                  const fusion::PipelineConfig& cfg);

inline constexpr const char* kSweepHeader = "scheme,snr_db,path_loss_factor,iou_thresh,seed,ap,mean_rms,frames";
void write_csv(std::ostream& os, const SweepResult& r);

/// Fixed-notation rendering used in tables ("inf" for an unimpaired link).
std::string format_number(double v);

}  // namespace coopsim::eval
