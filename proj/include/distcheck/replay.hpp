#pragma once

#include <string>

#include "distcheck/polling.hpp"

namespace distcheck {

struct ReplayChecks {
  bool s1 = true;
  bool s2 = true;
  bool liveness = true;
};

/// Re-checks an exported observation log without spawning processes.
/// Liveness is checked by the bounded-liveness reduction: an entry with
/// bound B and trigger observed at T0 is violated iff its expected
/// condition fails on the log prefix received by T0+B. Decode failures
/// report the line number.
RunReport replay(const std::string& path, const ReplayChecks& checks = {});

}  // namespace distcheck
