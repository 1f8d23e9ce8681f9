#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "distcheck/faults.hpp"
#include "distcheck/liveness.hpp"
#include "distcheck/observe.hpp"
#include "distcheck/property.hpp"
#include "distcheck/runtime.hpp"

namespace distcheck {

struct ChecksConfig {
  bool s1 = true;
  bool s2 = true;
  bool strict_unique_question = false;
};

/// Liveness bounds in seconds; an absent entry is not checked.
struct TimeoutsConfig {
  std::optional<double> q_r;    // question sent -> first reply received by poller
  std::optional<double> q_o;    // question sent -> all pollees received the outcome
  std::optional<double> total;  // whole-execution bound; condition is end detection
  bool any() const { return q_r || q_o || total; }
};

/// The reference workload: a poller sends a question to pollees, awaits a
/// reply from each, then broadcasts the count of 'Y' replies; a checker
/// observes everything and evaluates the configured properties.
struct PollingScenario {
  int num_pollees = 10;
  std::string question = "Will you?";
  ChecksConfig checks;
  TimeoutsConfig timeouts;
  FaultConfig faults;  // applied only when any fault is enabled
  ExecMode mode = ExecMode::Deterministic;
  ChannelOrder channel_order = ChannelOrder::Fifo;
  bool logical_clocks = true;
  std::uint64_t seed = 1;
  int runs = 1;
  std::string export_log;       // path; ".runN" appended when runs > 1
  double max_wall_secs = 60.0;  // concurrent-mode stall cap

  std::vector<std::string> validate() const;
};

struct SingleRun {
  int index = 0;
  std::uint64_t seed = 0;
  bool end_detected = false;
  std::optional<CheckResult> s1;
  std::optional<CheckResult> s2;
  std::vector<Violation> violations;
  FaultCounters fault_counts;
  Runtime::Stats runtime_stats;
  double wall_secs = 0;
  std::shared_ptr<const ObservationLog> log;
  ProcessId poller;
  std::vector<ProcessId> pollees;
  std::vector<std::pair<ProcessId, std::string>> transcript;
  std::optional<std::int64_t> outcome;  // count of 'Y' repliers, when announced
  int malformed_envelopes = 0;
  int internal_errors = 0;

  bool passed() const;
};

struct RunReport {
  PollingScenario scenario;
  std::vector<SingleRun> runs;
  bool replayed = false;

  bool all_passed() const;
  /// 0 = all enabled checks passed in every run, 1 = some check failed,
  /// 3 = internal checker error. (2 is reserved for validation errors.)
  int exit_code() const;
};

RunReport run_polling(const PollingScenario& s);

/// Deterministic 'Y'/'N' choice as a function of (pollee id, seed).
char pollee_choice(const ProcessId& pid, std::uint64_t seed);

/// Per-run seed derivation: run i of a scenario uses seed + i.
std::uint64_t run_seed(const PollingScenario& s, int index);

/// Liveness entries for the polling workload from configured bounds.
LivenessSpec make_polling_liveness(const TimeoutsConfig& t, const ProcessId& poller,
                                   const std::vector<ProcessId>& pollees);

/// Runs one scenario instance with introspection, optionally without
/// instrumentation (no envelopes, idle checker). Used by transparency and
/// clock-property tests.
struct ProbeResult {
  SingleRun run;
  std::map<ProcessId, std::vector<HistoryEntry>> sent;
  std::map<ProcessId, std::vector<HistoryEntry>> received;
  std::map<ProcessId, std::vector<ClockEvent>> clocks;
};
ProbeResult probe_polling(const PollingScenario& s, bool instrumented,
                          std::uint64_t seed_override = 0);

/// Exported-log header carrying the identities and check configuration a
/// replay needs: ('meta', poller, {pollees}, ((name, bound_ns)...), ('checks', s1, s2, strict)).
std::string encode_log_meta(const SingleRun& run, const PollingScenario& s);

// --- report ------------------------------------------------------------

/// Writes the report: header, per-run blocks, aggregate footer. Every
/// human-readable line is immediately followed by its machine-readable
/// twin (prefix "#:"); wall-time twins are tagged WALL so determinism
/// comparisons can exclude real-time fields.
void print_report(std::ostream& os, const RunReport& report);

/// The machine-readable lines only, optionally without real-time fields.
std::vector<std::string> machine_lines(const RunReport& report, bool include_realtime);

}  // namespace distcheck
