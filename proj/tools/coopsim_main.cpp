// SPDX-License-Identifier: Apache-2.0
// Command-line front end: generate | run | sweep | train-ae.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coopsim/codec.hpp"
#include "coopsim/config.hpp"
#include "coopsim/errors.hpp"
#include "coopsim/eval.hpp"
#include "coopsim/fusion.hpp"
#include "coopsim/scene_io.hpp"

namespace fs = std::filesystem;
using namespace coopsim;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kRuntime = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.output_dir = *o.out;
    if (o.jobs) {
        if (*o.jobs < 1) throw ConfigError("--jobs must be at least 1");
        c.jobs = *o.jobs;
    }
    return c;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

/// Writes through a temporary sibling and renames it into place.
void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os << content;
        if (!os.flush()) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const codec::AEParams* attach_codec(const ExperimentConfig& c, fusion::PipelineConfig& cfg,
                                    std::optional<codec::AEParams>& storage) {
    if (!c.codec_enabled) return nullptr;
    storage = codec::load_params(c.codec_params);
    if (c.codec_feature == fusion::FeatureLevel::Feature3D) cfg.codec3d = &*storage;
    else cfg.codec2d = &*storage;
    return &*storage;
}

int cmd_generate(const Options& o, int count) {
    const ExperimentConfig c = load(o);
    if (count < 1) throw ConfigError("--count must be at least 1");
    const fs::path dir = c.output_dir / "scenes";
    make_dir(dir);
    const auto scenes = generate_scenes(c, 0, count);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.txt", i);
        write_atomic(dir / name, scene::scenario_to_string(scenes[i]));
    }
    std::cout << "wrote " << scenes.size() << " scenario files to " << dir.string() << "\n";
    return kOk;
}

int cmd_run(const Options& o, const std::string& scenario_path, const std::string& scheme_name, double snr_db) {
    const ExperimentConfig c = load(o);
    const fusion::FusionScheme scheme = fusion::FusionScheme::parse(scheme_name);
    if (!fs::exists(scenario_path)) throw IoError("scenario file not found: " + scenario_path);
    const scene::Scenario s = scene::load_scenario(scenario_path);

    fusion::PipelineConfig cfg = c.pipeline;
    std::optional<codec::AEParams> storage;
    if (scheme.use_autoencoder) {
        if (c.codec_params.empty()) throw ConfigError("scheme " + scheme.name() + " needs codec.params");
        storage = codec::load_params(c.codec_params);
        if (scheme.feature == fusion::FeatureLevel::Feature3D) cfg.codec3d = &*storage;
        else cfg.codec2d = &*storage;
    }

    channel::ChannelParams link = c.channel;
    link.snr_db = snr_db;
    const std::uint64_t run_seed = c.seeds.front();
    const auto prepared = fusion::prepare_scene(s, cfg);
    const auto r = fusion::run_pipeline(prepared, scheme, link, fusion::LinkSeed{c.seed, run_seed, 0}, cfg);

    std::ostringstream os;
    os << "scenario " << scenario_path << "\n";
    os << "scheme " << scheme.name() << " snr_db " << eval::format_number(snr_db) << " path_loss_factor "
       << eval::format_number(link.path_loss_factor) << " seed " << run_seed << "\n";
    os << "detections " << r.detections.size() << "\n";
    for (const auto& d : r.detections) {
        const auto& b = d.box;
        os << "  " << fixed(b.center.x, 4) << " " << fixed(b.center.y, 4) << " " << fixed(b.center.z, 4) << " "
           << fixed(b.length, 4) << " " << fixed(b.width, 4) << " " << fixed(b.height, 4) << " "
           << fixed(b.yaw, 4) << " score " << fixed(d.score, 4) << "\n";
    }
    for (const auto& cav : r.cavs) {
        os << "cav " << cav.agent << " distance "
           << fixed(prepared.cav_distances.at(static_cast<std::size_t>(cav.agent - 1)), 3);
        if (cav.dropped) os << " dropped " << cav.reason;
        else os << " rms " << fixed(cav.rms_error, 6) << " reals " << cav.transmitted_reals;
        os << "\n";
    }
    os << "ground_truth " << s.gt_boxes.size() << "\n";
    for (double iou : c.iou_grid) {
        const auto m = eval::match_detections(r.detections, s.gt_boxes, iou);
        os << "ap@" << fixed(iou, 2) << " " << fixed(eval::average_precision(m), 6) << "\n";
    }
    std::cout << os.str();
    return kOk;
}

/// One (x, AP) curve per (scheme, iou), AP averaged over seeds. The x axis is
/// SNR unless only the path-loss grid varies; with both varying, one file per n.
std::map<std::string, std::string> plot_files(const ExperimentConfig& c, const eval::SweepResult& r) {
    const bool x_is_n = c.snr_grid.size() == 1 && c.n_grid.size() > 1;
    const bool split_n = !x_is_n && c.n_grid.size() > 1;
    struct Acc {
        double sum = 0.0;
        int count = 0;
    };
    // file name -> x -> accumulated AP (std::map keeps x ascending)
    std::map<std::string, std::map<double, Acc>> curves;
    std::map<std::string, std::string> headers;
    for (const auto& row : r.rows) {
        std::string name = row.scheme + "_iou" + fixed(row.iou_thresh, 2);
        if (split_n) name += "_n" + fixed(row.path_loss_factor, 2);
        name += ".dat";
        const double x = x_is_n ? row.path_loss_factor : row.snr_db;
        auto& acc = curves[name][x];
        acc.sum += row.ap;
        ++acc.count;
        if (!headers.count(name)) {
            std::string h = "# scheme " + row.scheme + "\n# iou_thresh " + fixed(row.iou_thresh, 2) + "\n";
            if (x_is_n) h += "# snr_db " + eval::format_number(row.snr_db) + "\n";
            else h += "# path_loss_factor " + eval::format_number(row.path_loss_factor) + "\n";
            h += "# seeds " + std::to_string(c.seeds.size()) + "\n";
            h += std::string("# ") + (x_is_n ? "path_loss_factor" : "snr_db") + " ap\n";
            headers[name] = h;
        }
    }
    std::map<std::string, std::string> out;
    for (const auto& [name, pts] : curves) {
        std::string body = headers[name];
        for (const auto& [x, acc] : pts) body += eval::format_number(x) + " " + fixed(acc.sum / acc.count, 6) + "\n";
        out[name] = body;
    }
    return out;
}

int cmd_sweep(const Options& o) {
    const ExperimentConfig c = load(o);
    make_dir(c.output_dir);
    std::vector<std::string> written;
    const auto manifest = [&](const std::string& status) {
        std::string m = "# status " + status + "\n";
        for (const auto& w : written) m += w + "\n";
        write_atomic(c.output_dir / "manifest.txt", m);
    };
    try {
        fusion::PipelineConfig cfg = c.pipeline;
        std::optional<codec::AEParams> storage;
        attach_codec(c, cfg, storage);
        const auto scenes = generate_scenes(c, 0, c.scenes);
        const auto result = eval::sweep(scenes, c.sweep_spec(), cfg);

        std::ostringstream csv;
        eval::write_csv(csv, result);
        write_atomic(c.output_dir / "sweep.csv", csv.str());
        written.push_back("sweep.csv");
        for (const auto& [name, body] : plot_files(c, result)) {
            write_atomic(c.output_dir / name, body);
            written.push_back(name);
        }
        std::string diag;
        for (const auto& d : result.diagnostics) diag += d + "\n";
        write_atomic(c.output_dir / "diagnostics.txt", diag);
        written.push_back("diagnostics.txt");
        manifest("complete");
        std::cout << "wrote " << result.rows.size() << " rows and " << written.size() - 2 << " plot files to "
                  << c.output_dir.string() << "\n";
    } catch (const std::exception& e) {
        try {
            manifest(std::string("failed: ") + e.what());
        } catch (const std::exception&) {
        }
        throw;
    }
    return kOk;
}

int cmd_train_ae(const Options& o, const std::string& dataset_dir) {
    const ExperimentConfig c = load(o);
    if (!fs::is_directory(dataset_dir)) throw IoError("dataset directory not found: " + dataset_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dataset_dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("dataset directory holds no scenario files: " + dataset_dir);

    std::vector<scene::Scenario> scenes;
    for (const auto& f : files) scenes.push_back(scene::load_scenario(f));
    const auto data = codec_dataset(scenes, c, c.train_maps);
    if (data.empty()) throw IoError("dataset holds no CAV feature maps: " + dataset_dir);

    codec::TrainReport report;
    const codec::AEParams params = train_codec(data, c, &report);

    make_dir(c.output_dir);
    std::ostringstream bin;
    codec::write_params(bin, params);
    write_atomic(c.output_dir / "ae_params.bin", bin.str());
    std::string log = "epoch,loss\n";
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        log += std::to_string(e + 1) + "," + fixed(report.epoch_loss[e], 9) + "\n";
    write_atomic(c.output_dir / "ae_loss.csv", log);
    std::cout << "trained on " << data.size() << " maps; initial loss " << fixed(report.initial_loss, 6)
              << ", final loss " << fixed(report.epoch_loss.back(), 6) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative perception over V2V links simulator"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "Experiment config file")->required();
        sub->add_option("--seed", o.seed, "Master seed override");
        sub->add_option("--out", o.out, "Output directory override");
        sub->add_option("--jobs", o.jobs, "Worker threads override");
    };

    int count = 1;
    auto* gen = app.add_subcommand("generate", "Write scenario files");
    common(gen);
    gen->add_option("--count", count, "Number of scenarios")->required();

    std::string scenario_path, scheme = "intermediate";
    double snr_db = 10.0;
    auto* run = app.add_subcommand("run", "Run one frame and print a report");
    common(run);
    run->add_option("--scenario", scenario_path, "Scenario file")->required();
    run->add_option("--scheme", scheme, "Fusion scheme")->required();
    run->add_option("--snr", snr_db, "Received SNR in dB")->required();

    auto* sw = app.add_subcommand("sweep", "Run the configured sweep");
    common(sw);

    std::string dataset;
    auto* tr = app.add_subcommand("train-ae", "Train the feature codec");
    common(tr);
    tr->add_option("--dataset", dataset, "Directory of scenario files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (gen->parsed()) return cmd_generate(o, count);
        if (run->parsed()) return cmd_run(o, scenario_path, scheme, snr_db);
        if (sw->parsed()) return cmd_sweep(o);
        return cmd_train_ae(o, dataset);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        if (run->parsed()) std::cerr << run->help();
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
