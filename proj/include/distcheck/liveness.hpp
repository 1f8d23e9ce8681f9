#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distcheck/observe.hpp"
#include "distcheck/property.hpp"

namespace distcheck {

/// One bounded-liveness deadline: once `trigger` is first observed, the
/// `expected` condition must hold within `bound` (checker real time).
struct LivenessEntry {
  std::string name;
  std::optional<LogQuery> trigger;  // nullopt = armed at run start
  FormulaPtr expected;
  Nanos bound = 0;
};

/// Named deadline entries plus the optional bound on the whole execution;
/// the total entry's expected condition is end detection.
struct LivenessSpec {
  std::vector<LivenessEntry> entries;

  std::vector<std::string> validate() const;
  bool empty() const { return entries.empty(); }
  const LivenessEntry* find(const std::string& name) const;
};

struct Violation {
  std::string name;
  Nanos elapsed = 0;
  Nanos bound = 0;
  std::optional<Env> witness;
  std::string detail;
};

/// Message a timer sends to the checker when it fires.
struct TimerMsg {
  std::string name;
  Nanos started_at = 0;
};

/// Decodes ('timer', name, started_ns); nullopt if the payload is not one.
std::optional<TimerMsg> parse_timer_msg(const Value& payload);

/// Drives the timer-per-deadline reduction of bounded liveness to safety.
/// Owned by the checker and called only from its execution context; timers
/// run elsewhere but communicate solely via TimerMsg into the checker's
/// mailbox.
class LivenessMonitor {
 public:
  using TimerStarter = std::function<void(const std::string& name, Nanos bound)>;

  explicit LivenessMonitor(LivenessSpec spec);

  /// Starts timers for trigger-less entries (the total bound). Call once
  /// before the run's first observation.
  void arm(Nanos now, const TimerStarter& start);

  /// Trigger matching: the first observation matching an entry's trigger
  /// starts its one-shot timer and captures the trigger bindings.
  void on_observation(const ObservationRecord& rec, const TimerStarter& start);

  /// Evaluates the named entry's expected condition against the current
  /// log; returns a violation if it does not hold. Unknown names are
  /// reported via internal_errors().
  std::optional<Violation> on_timer(const TimerMsg& msg, Nanos now,
                                    const ObservationLog& log);

  int internal_errors() const { return internal_errors_; }
  const LivenessSpec& spec() const { return spec_; }

 private:
  struct Armed {
    bool started = false;
    bool fired = false;
    Nanos started_at = 0;
    Env trigger_env;
  };
  LivenessSpec spec_;
  std::map<std::string, Armed> state_;
  int internal_errors_ = 0;
};

}  // namespace distcheck
