// SPDX-License-Identifier: Apache-2.0
#include "coopsim/scene_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "coopsim/errors.hpp"

namespace coopsim::scene {

namespace {

constexpr const char* kMagic = "coopsim-scenario";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double parse_num(std::istringstream& ls, int line) {
    std::string tok;
    if (!(ls >> tok)) throw ConfigError("missing numeric field", line);
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw ConfigError("malformed number '" + tok + "'", line);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("malformed number '" + tok + "'", line);
    }
}

}  // namespace

void write_scenario(std::ostream& os, const Scenario& s) {
    os << kMagic << " 1\n";
    const auto pose = [&](const Pose& p) {
        os << num(p.x) << ' ' << num(p.y) << ' ' << num(p.z) << ' ' << num(p.yaw) << '\n';
    };
    os << "ego ";
    pose(s.ego_pose);
    for (std::size_t k = 0; k < s.cav_poses.size(); ++k) {
        os << "cav " << k + 1 << ' ';
        pose(s.cav_poses[k]);
    }
    for (const auto& b : s.gt_boxes) {
        os << "box " << num(b.center.x) << ' ' << num(b.center.y) << ' ' << num(b.center.z) << ' '
           << num(b.length) << ' ' << num(b.width) << ' ' << num(b.height) << ' ' << num(b.yaw)
           << '\n';
    }
    for (std::size_t a = 0; a < s.clouds.size(); ++a) {
        for (const auto& p : s.clouds[a].points)
            os << "pt " << a << ' ' << num(p.x) << ' ' << num(p.y) << ' ' << num(p.z) << '\n';
    }
}

Scenario read_scenario(std::istream& is) {
    Scenario s;
    std::string text;
    int line = 0;
    bool header = false, have_ego = false;
    while (std::getline(is, text)) {
        ++line;
        if (text.empty() || text[0] == '#') continue;
        std::istringstream ls(text);
        std::string tag;
        ls >> tag;
        if (!header) {
            int version = 0;
            if (tag != kMagic || !(ls >> version) || version != 1)
                throw ConfigError("not a coopsim scenario file", line);
            header = true;
            continue;
        }
        if (tag == "ego") {
            const double x = parse_num(ls, line), y = parse_num(ls, line), z = parse_num(ls, line),
                         yaw = parse_num(ls, line);
            s.ego_pose = Pose::make(x, y, z, yaw);
            have_ego = true;
        } else if (tag == "cav") {
            int id = 0;
            if (!(ls >> id) || id != static_cast<int>(s.cav_poses.size()) + 1)
                throw ConfigError("CAV ids must be consecutive from 1", line);
            const double x = parse_num(ls, line), y = parse_num(ls, line), z = parse_num(ls, line),
                         yaw = parse_num(ls, line);
            s.cav_poses.push_back(Pose::make(x, y, z, yaw));
        } else if (tag == "box") {
            double v[7];
            for (double& x : v) x = parse_num(ls, line);
            try {
                s.gt_boxes.push_back(BoxLabel::make({v[0], v[1], v[2]}, v[3], v[4], v[5], v[6]));
            } catch (const DomainError& e) {
                throw ConfigError(e.what(), line);
            }
        } else if (tag == "pt") {
            int agent = -1;
            if (!(ls >> agent) || agent < 0 || agent > static_cast<int>(s.cav_poses.size()))
                throw ConfigError("point references an unknown agent", line);
            if (s.clouds.size() < s.cav_poses.size() + 1) {
                s.clouds.resize(s.cav_poses.size() + 1);
                for (std::size_t a = 0; a < s.clouds.size(); ++a) s.clouds[a].frame = static_cast<int>(a);
            }
            const double x = parse_num(ls, line), y = parse_num(ls, line), z = parse_num(ls, line);
            s.clouds[static_cast<std::size_t>(agent)].points.push_back({x, y, z});
        } else {
            throw ConfigError("unknown record '" + tag + "'", line);
        }
        std::string extra;
        if (ls >> extra) throw ConfigError("trailing field '" + extra + "'", line);
    }
    if (!header || !have_ego) throw ConfigError("scenario is missing its header or ego record");
    if (s.clouds.size() < s.cav_poses.size() + 1) {
        const std::size_t old = s.clouds.size();
        s.clouds.resize(s.cav_poses.size() + 1);
        for (std::size_t a = old; a < s.clouds.size(); ++a) s.clouds[a].frame = static_cast<int>(a);
    }
    return s;
}

std::string scenario_to_string(const Scenario& s) {
    std::ostringstream os;
    write_scenario(os, s);
    return os.str();
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write " + path.string());
        write_scenario(os, s);
        if (!os) throw IoError("write failed for " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " into place: " + ec.message());
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open scenario " + path.string());
    return read_scenario(is);
}

}  // namespace coopsim::scene
