// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "coopsim/scene.hpp"

namespace coopsim::scene {

/// Line-oriented scenario text format, numbers at 9 significant digits:
///
///     coopsim-scenario 1
///     ego X Y Z YAW
///     cav ID X Y Z YAW          (one per CAV, ids 1..K in order)
///     box X Y Z L W H YAW       (ground truth, ego frame)
///     pt AGENT X Y Z            (points, agent frame)
///
/// Blank lines and lines starting with '#' are ignored.
void write_scenario(std::ostream& os, const Scenario& s);
Scenario read_scenario(std::istream& is);

std::string scenario_to_string(const Scenario& s);
void save_scenario(const std::filesystem::path& path, const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace coopsim::scene
