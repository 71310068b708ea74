#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treedual::testing {

std::string read_scenario_file(const std::string& name) {
  const std::string path = std::string(TREEDUAL_SCENARIO_DIR) + "/" + name + ".json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario load_scenario(const std::string& name) {
  const std::string text = read_scenario_file(name);
  MarketModel model = parse_scenario(text);
  UtilityField utility = UtilityField::from_scenario(text, model);
  return Scenario{std::move(model), std::move(utility)};
}

}  // namespace treedual::testing
