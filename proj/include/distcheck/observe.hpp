#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "distcheck/base.hpp"
#include "distcheck/pattern.hpp"
#include "distcheck/runtime.hpp"
#include "distcheck/value.hpp"

namespace distcheck {

enum class Direction { Sent, Rcvd };

/// One checker-side fact about a monitored process: direction, payload, the
/// peer set (targets for Sent, the single sender for Rcvd), the reporting
/// process, the logical time when reported, and the checker-local monotonic
/// receipt time.
struct ObservationRecord {
  Direction dir;
  Value payload;
  std::vector<ProcessId> peers;  // sorted; exactly one for Rcvd
  ProcessId reporter;
  std::optional<std::uint64_t> logical_time;
  Nanos recv_time = 0;
};

/// Append-only, stably ordered sequence of observation records. Receipt
/// times are non-decreasing in arrival order.
class ObservationLog {
 public:
  void append(ObservationRecord rec);
  std::size_t size() const { return recs_.size(); }
  bool empty() const { return recs_.empty(); }
  const ObservationRecord& operator[](std::size_t i) const { return recs_[i]; }
  auto begin() const { return recs_.begin(); }
  auto end() const { return recs_.end(); }

 private:
  std::vector<ObservationRecord> recs_;
};

/// Per-process-kind switches controlling what an instrumented process
/// reports. The peer set can be omitted from Sent envelopes only (Rcvd
/// records always carry their single sender). The payload mask scrubs the
/// components at wildcard positions and never alters the others.
struct InstrumentationPolicy {
  bool report_sends = true;
  bool report_receives = true;
  bool include_peers = true;
  bool include_logical_time = true;
  std::optional<Pattern> payload_mask;

  static InstrumentationPolicy full() { return {}; }
};

/// Replaces payload components at the mask's wildcard positions with the
/// '_' atom; positions the mask does not structurally cover pass unchanged.
Value apply_mask(const Pattern& mask, const Value& payload);

/// Envelope wire form, expressible in the value universe:
///   ('sent', payload, peers) or ('sent', payload, peers, t)   and 'rcvd' alike.
Value make_envelope(Direction dir, const Value& payload, const std::vector<ProcessId>& peers,
                    std::optional<std::uint64_t> logical_time);

/// Returns a definition that behaves identically for the algorithm but
/// mirrors every send and every processed delivery to `checker` (subject to
/// `policy`) over reliable, fault-exempt internal channels. Envelope sends
/// do not tick the clock, do not enter the reporter's histories, and are
/// never re-observed. Instrumenting a checker definition, or a definition
/// twice, is an error.
ProcessDef instrument(const ProcessDef& def, const ProcessId& checker,
                      const InstrumentationPolicy& policy);

/// Parses an envelope payload into a record stamped with `recv_time`.
/// Returns nullopt for malformed envelopes.
std::optional<ObservationRecord> parse_envelope(const Value& envelope,
                                                const ProcessId& reporter, Nanos recv_time);

/// Checker-side history query: one Env per matching record. For Sent
/// records the peer pattern matches if it matches any member of the target
/// set (first member in id order wins a fresh binding). A time pattern
/// never matches a record without a logical time.
struct LogQuery {
  Direction dir;
  Pattern reporter;
  Pattern payload;
  std::optional<Pattern> peer;
  std::optional<Pattern> time;
};

std::optional<Env> match_record(const LogQuery& q, const ObservationRecord& rec,
                                const Env& env);
std::vector<Env> observed(const ObservationLog& log, const LogQuery& q, const Env& env = {});

// --- log export / import ---------------------------------------------------
// One encoded value per line:
//   ('obs', direction, reporter, payload, peers, logical_time|'none', recv_ns)
// preceded by a meta line written by the harness (see replay).

std::string encode_record(const ObservationRecord& rec);
ObservationRecord decode_record(std::string_view line);

void write_log(std::ostream& os, const ObservationLog& log);

}  // namespace distcheck
