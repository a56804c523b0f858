// SPDX-License-Identifier: Apache-2.0
#include "coopsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "coopsim/errors.hpp"

namespace coopsim {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& v, int line) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw ConfigError("expected a number, got '" + v + "'", line);
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError("expected a number, got '" + v + "'", line);
    }
}

long long to_int(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw ConfigError("expected an integer, got '" + v + "'", line);
        return i;
    } catch (const std::logic_error&) {
        throw ConfigError("expected an integer, got '" + v + "'", line);
    }
}

bool to_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + v + "'", line);
}

std::vector<double> to_doubles(const std::string& v, int line) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(s, line));
    if (out.empty()) throw ConfigError("list must not be empty", line);
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto dbl = [](double& (*field)(ExperimentConfig&)) {
            return [field](ExperimentConfig& c, const std::string& v, int l) { field(c) = to_double(v, l); };
        };
        auto intg = [](int& (*field)(ExperimentConfig&)) {
            return [field](ExperimentConfig& c, const std::string& v, int l) {
                field(c) = static_cast<int>(to_int(v, l));
            };
        };

        t["experiment.seed"] = [](ExperimentConfig& c, const std::string& v, int l) {
            c.seed = static_cast<std::uint64_t>(to_int(v, l));
        };
        t["experiment.output_dir"] = [](ExperimentConfig& c, const std::string& v, int) { c.output_dir = v; };
        t["experiment.scenes"] = intg([](ExperimentConfig& c) -> int& { return c.scenes; });
        t["experiment.jobs"] = intg([](ExperimentConfig& c) -> int& { return c.jobs; });

        t["scenario.num_cavs"] = intg([](ExperimentConfig& c) -> int& { return c.scenario.num_cavs; });
        t["scenario.num_objects_min"] = intg([](ExperimentConfig& c) -> int& { return c.scenario.num_objects_min; });
        t["scenario.num_objects_max"] = intg([](ExperimentConfig& c) -> int& { return c.scenario.num_objects_max; });
        t["scenario.range_x_min"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.range.x_min; });
        t["scenario.range_x_max"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.range.x_max; });
        t["scenario.range_y_min"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.range.y_min; });
        t["scenario.range_y_max"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.range.y_max; });
        t["scenario.layout"] = [](ExperimentConfig& c, const std::string& v, int l) {
            if (v == "road") c.scenario.layout = scene::Layout::Road;
            else if (v == "open") c.scenario.layout = scene::Layout::Open;
            else throw ConfigError("layout must be 'road' or 'open'", l);
        };
        t["scenario.lane_width"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.lane_width; });
        t["scenario.lanes_per_side"] = intg([](ExperimentConfig& c) -> int& { return c.scenario.lanes_per_side; });
        t["scenario.yaw_jitter_deg"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.yaw_jitter_deg; });
        t["scenario.cav_min_distance"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.cav_min_distance; });
        t["scenario.cav_max_distance"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.cav_max_distance; });
        t["scenario.sensor_max_range"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.sensor.max_range; });
        t["scenario.azimuth_resolution_deg"] =
            dbl([](ExperimentConfig& c) -> double& { return c.scenario.sensor.azimuth_resolution_deg; });
        t["scenario.vertical_samples"] = intg([](ExperimentConfig& c) -> int& { return c.scenario.sensor.vertical_samples; });
        t["scenario.point_noise_std"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.sensor.noise_std; });
        t["scenario.roof_spacing"] = dbl([](ExperimentConfig& c) -> double& { return c.scenario.sensor.roof_spacing; });
        t["scenario.ground_ranges"] = [](ExperimentConfig& c, const std::string& v, int l) {
            c.scenario.sensor.ground_ranges = v == "none" ? std::vector<double>{} : to_doubles(v, l);
        };

        t["channel.p0"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.p0; });
        t["channel.rician_k"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.rician_k; });
        t["channel.snr_db"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.snr_db; });
        t["channel.path_loss_factor"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.path_loss_factor; });
        t["channel.csi_error_variance"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.csi_error_variance; });
        t["channel.noise_reference"] = [](ExperimentConfig& c, const std::string& v, int l) {
            if (v == "received") c.channel.noise_reference = channel::NoiseReference::ReceivedPower;
            else if (v == "baseline") c.channel.noise_reference = channel::NoiseReference::BaselinePathLoss;
            else throw ConfigError("noise_reference must be 'received' or 'baseline'", l);
        };
        t["channel.baseline_distance"] = dbl([](ExperimentConfig& c) -> double& { return c.channel.baseline_distance_m; });
        t["channel.baseline_path_loss_factor"] =
            dbl([](ExperimentConfig& c) -> double& { return c.channel.baseline_path_loss_factor; });

        t["detector.threshold"] = dbl([](ExperimentConfig& c) -> double& { return c.pipeline.head.threshold; });
        t["detector.min_cells"] = intg([](ExperimentConfig& c) -> int& { return c.pipeline.head.min_cells; });
        t["detector.occupancy_channel"] =
            intg([](ExperimentConfig& c) -> int& { return c.pipeline.head.occupancy_channel; });
        t["detector.fused_threshold"] = dbl([](ExperimentConfig& c) -> double& { return c.pipeline.fused_head.threshold; });
        t["detector.fused_min_cells"] = intg([](ExperimentConfig& c) -> int& { return c.pipeline.fused_head.min_cells; });
        t["detector.fused_occupancy_channel"] =
            intg([](ExperimentConfig& c) -> int& { return c.pipeline.fused_head.occupancy_channel; });
        t["detector.cav_threshold"] = dbl([](ExperimentConfig& c) -> double& { return c.pipeline.cav_head.threshold; });
        t["detector.cav_min_cells"] = intg([](ExperimentConfig& c) -> int& { return c.pipeline.cav_head.min_cells; });
        t["detector.cav_occupancy_channel"] =
            intg([](ExperimentConfig& c) -> int& { return c.pipeline.cav_head.occupancy_channel; });
        t["detector.hull_inset_cells"] = [](ExperimentConfig& c, const std::string& v, int l) {
            const double inset = to_double(v, l);
            c.pipeline.head.hull_inset_cells = c.pipeline.fused_head.hull_inset_cells =
                c.pipeline.cav_head.hull_inset_cells = inset;
        };
        t["detector.min_points"] = intg([](ExperimentConfig& c) -> int& { return c.pipeline.grid.min_points; });
        t["detector.nms_iou"] = dbl([](ExperimentConfig& c) -> double& { return c.pipeline.nms_iou; });
        t["detector.downsample_factor"] = intg([](ExperimentConfig& c) -> int& { return c.pipeline.downsample_factor; });

        t["sweep.schemes"] = [](ExperimentConfig& c, const std::string& v, int l) {
            c.schemes.clear();
            for (const auto& s : split_list(v)) {
                try {
                    c.schemes.push_back(fusion::FusionScheme::parse(s));
                } catch (const ConfigError& e) {
                    throw ConfigError(e.what(), l);
                }
            }
            if (c.schemes.empty()) throw ConfigError("scheme list must not be empty", l);
        };
        t["sweep.snr_db"] = [](ExperimentConfig& c, const std::string& v, int l) { c.snr_grid = to_doubles(v, l); };
        t["sweep.path_loss_factor"] = [](ExperimentConfig& c, const std::string& v, int l) {
            c.n_grid = to_doubles(v, l);
        };
        t["sweep.iou"] = [](ExperimentConfig& c, const std::string& v, int l) { c.iou_grid = to_doubles(v, l); };
        t["sweep.seeds"] = [](ExperimentConfig& c, const std::string& v, int l) {
            c.seeds.clear();
            for (const auto& s : split_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_int(s, l)));
            if (c.seeds.empty()) throw ConfigError("seed list must not be empty", l);
        };

        t["codec.enabled"] = [](ExperimentConfig& c, const std::string& v, int l) { c.codec_enabled = to_bool(v, l); };
        t["codec.params"] = [](ExperimentConfig& c, const std::string& v, int) { c.codec_params = v; };
        t["codec.feature"] = [](ExperimentConfig& c, const std::string& v, int l) {
            if (v == "3d") c.codec_feature = fusion::FeatureLevel::Feature3D;
            else if (v == "2d") c.codec_feature = fusion::FeatureLevel::Feature2D;
            else throw ConfigError("codec feature must be '3d' or '2d'", l);
        };
        t["codec.learning_rate"] = dbl([](ExperimentConfig& c) -> double& { return c.train.learning_rate; });
        t["codec.epochs"] = intg([](ExperimentConfig& c) -> int& { return c.train.epochs; });
        t["codec.batch_size"] = intg([](ExperimentConfig& c) -> int& { return c.train.batch_size; });
        t["codec.train_maps"] = intg([](ExperimentConfig& c) -> int& { return c.train_maps; });
        t["codec.channel_in_loop_snr_db"] = [](ExperimentConfig& c, const std::string& v, int l) {
            channel::ChannelParams p;
            p.snr_db = to_double(v, l);
            c.train.channel_in_loop = p;
        };
        return t;
    }();
    return table;
}

}  // namespace

eval::SweepSpec ExperimentConfig::sweep_spec() const {
    eval::SweepSpec s;
    for (auto sch : schemes) {
        if (codec_enabled && sch.kind == fusion::SchemeKind::ConvFeatureLate) sch.use_autoencoder = true;
        s.schemes.push_back(sch);
    }
    s.snr_grid = snr_grid;
    s.n_grid = n_grid;
    s.iou_grid = iou_grid;
    s.seeds = seeds;
    s.base = channel;
    s.master_seed = seed;
    s.jobs = jobs;
    return s;
}

ExperimentConfig parse_config(std::istream& is, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    std::string section, text;
    int line = 0;
    bool range_changed = false;
    while (std::getline(is, text)) {
        ++line;
        const auto hash = text.find('#');
        if (hash != std::string::npos) text.resize(hash);
        text = trim(text);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError("malformed section header", line);
            section = trim(text.substr(1, text.size() - 2));
            static const char* known[] = {"experiment", "scenario", "channel", "detector", "sweep", "codec"};
            bool ok = false;
            for (const char* k : known) ok = ok || section == k;
            if (!ok) throw ConfigError("unknown section [" + section + "]", line);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        if (section.empty()) throw ConfigError("key outside of any section", line);
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        const auto it = setters().find(section + "." + key);
        if (it == setters().end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
        if (value.empty()) throw ConfigError("empty value for '" + key + "'", line);
        it->second(c, value, line);
        if (key.rfind("range_", 0) == 0) range_changed = true;
    }

    // the pipeline grid follows the detection range; detector overrides survive
    if (range_changed) {
        auto rebuilt = fusion::PipelineConfig::for_range(c.scenario.range);
        rebuilt.grid.min_points = c.pipeline.grid.min_points;
        rebuilt.head = c.pipeline.head;
        rebuilt.fused_head = c.pipeline.fused_head;
        rebuilt.cav_head = c.pipeline.cav_head;
        rebuilt.nms_iou = c.pipeline.nms_iou;
        rebuilt.downsample_factor = c.pipeline.downsample_factor;
        c.pipeline = rebuilt;
    }

    try {
        c.pipeline.grid.validate();
        c.scenario.validate();
        c.channel.validate();
        c.train.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (c.scenes < 1) throw ConfigError("experiment.scenes must be at least 1");
    if (c.jobs < 1) throw ConfigError("experiment.jobs must be at least 1");
    if (c.train_maps < 1) throw ConfigError("codec.train_maps must be at least 1");
    if (!c.codec_params.empty() && c.codec_params.is_relative() && !base_dir.empty())
        c.codec_params = base_dir / c.codec_params;
    if (c.codec_enabled) {
        if (c.codec_params.empty()) throw ConfigError("codec.enabled needs codec.params");
        if (!std::filesystem::exists(c.codec_params))
            throw ConfigError("codec parameter file not found: " + c.codec_params.string());
    }
    return c;
}

std::vector<scene::Scenario> generate_scenes(const ExperimentConfig& c, std::uint64_t first, int count) {
    std::vector<scene::Scenario> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        Rng rng = make_stream(derive_seed({c.seed}), first + static_cast<std::uint64_t>(i), 0,
                              StreamPurpose::Scenario);
        out.push_back(scene::generate_scenario(c.scenario, rng));
    }
    return out;
}

std::vector<codec::Tensor> codec_dataset(const std::vector<scene::Scenario>& scenes, const ExperimentConfig& c,
                                         int max_maps) {
    std::vector<codec::Tensor> out;
    for (const auto& s : scenes) {
        const auto p = fusion::prepare_scene(s, c.pipeline);
        for (std::size_t a = 1; a < p.agents.size(); ++a) {
            if (static_cast<int>(out.size()) >= max_maps) return out;
            out.push_back(c.codec_feature == fusion::FeatureLevel::Feature3D ? codec::to_tensor(p.agents[a].features3d)
                                                                              : codec::to_tensor(p.agents[a].bev));
        }
    }
    return out;
}

codec::AEParams train_codec(const std::vector<codec::Tensor>& data, const ExperimentConfig& c,
                            codec::TrainReport* report) {
    if (data.empty()) throw DomainError("codec training needs at least one feature map");
    codec::AEConfig ac;
    ac.channels = data.front().channels;
    ac.height = data.front().height;
    ac.width = data.front().width;
    Rng rng = make_stream(derive_seed({c.seed}), 0, 0, StreamPurpose::CodecTrain);
    return codec::ae_train(data, ac, c.train, rng, report);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    return parse_config(is, path.parent_path());
}

}  // namespace coopsim
