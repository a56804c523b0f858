// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "coopsim/channel.hpp"
#include "coopsim/codec.hpp"
#include "coopsim/eval.hpp"
#include "coopsim/fusion.hpp"
#include "coopsim/scene.hpp"

namespace coopsim {

/// Everything one CLI invocation needs. Loaded from a sectioned key = value
/// file; unknown sections or keys are errors.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    int scenes = 10;
    int jobs = 1;

    scene::ScenarioConfig scenario;
    channel::ChannelParams channel;
    fusion::PipelineConfig pipeline = fusion::PipelineConfig::for_range(Rect{});

    std::vector<fusion::FusionScheme> schemes{fusion::FusionScheme::parse("intermediate")};
    std::vector<double> snr_grid{-10, -5, 0, 5, 10, 15, 20, 25, 30};
    std::vector<double> n_grid{2.0};
    std::vector<double> iou_grid{0.3, 0.7};
    std::vector<std::uint64_t> seeds{1};

    bool codec_enabled = false;
    std::filesystem::path codec_params;  ///< parameters of the codec used by "+ae" schemes
    fusion::FeatureLevel codec_feature = fusion::FeatureLevel::Feature3D;
    codec::TrainConfig train;
    int train_maps = 32;

    /// Applies the grids to an eval::SweepSpec (codec flag turns conv schemes into "+ae").
    eval::SweepSpec sweep_spec() const;
};

/// Scenes `first` .. `first + count - 1` of the configured scenario stream.
std::vector<scene::Scenario> generate_scenes(const ExperimentConfig& c, std::uint64_t first, int count);

/// CAV feature maps at the codec's feature level, at most `max_maps`, in scene order.
std::vector<codec::Tensor> codec_dataset(const std::vector<scene::Scenario>& scenes, const ExperimentConfig& c,
                                         int max_maps);

/// Codec trained on `data` with the configured schedule; the stream derives from the master seed.
codec::AEParams train_codec(const std::vector<codec::Tensor>& data, const ExperimentConfig& c,
                            codec::TrainReport* report = nullptr);

/// Throws ConfigError with the offending line number.
ExperimentConfig parse_config(std::istream& is, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace coopsim
