#pragma once

#include <string>

#include "treedual/market_tree.hpp"
#include "treedual/preferences.hpp"

namespace treedual::testing {

/// Contents of a scenario file from the scenarios/ directory.
std::string read_scenario_file(const std::string& name);

struct Scenario {
  MarketModel model;
  UtilityField utility;
};

/// Loads and parses scenarios/<name>.json.
Scenario load_scenario(const std::string& name);

}  // namespace treedual::testing
