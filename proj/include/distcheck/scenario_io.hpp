#pragma once

#include <string>

#include "distcheck/polling.hpp"

namespace distcheck {

/// Parses "none", "fixed:SECS", or "uniform:LO,HI".
DelaySpec parse_delay_spec(const std::string& spec);

/// Builds a scenario from JSON text. Unknown keys and out-of-range values
/// raise ConfigError listing every problem found. Missing keys take the
/// documented defaults (10 pollees, no faults, S1+S2 on, liveness off).
PollingScenario scenario_from_json(const std::string& json_text);

/// Reads and parses a JSON config file.
PollingScenario load_scenario(const std::string& path);

}  // namespace distcheck
