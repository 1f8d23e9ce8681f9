#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "distcheck/base.hpp"
#include "distcheck/runtime.hpp"
#include "distcheck/value.hpp"

namespace distcheck {

struct DelaySpec {
  enum class Kind { None, Fixed, Uniform };
  Kind kind = Kind::None;
  double fixed_secs = 0.0;
  double min_secs = 0.0;
  double max_secs = 0.0;

  static DelaySpec none() { return {}; }
  static DelaySpec fixed(double secs) { return {Kind::Fixed, secs, 0, 0}; }
  static DelaySpec uniform(double lo, double hi) { return {Kind::Uniform, 0, lo, hi}; }
};

/// Restricts a fault configuration to sends from certain process kinds
/// and/or payloads with certain leading tags. Empty set means "all".
struct FaultScope {
  std::set<std::string> sender_kinds;
  std::set<std::string> payload_tags;
};

/// Named pure payload transformer used for corruption.
using CorruptFn = std::function<Value(const Value&)>;

/// Built-in transformers: "flip-outcome" increments the count in an
/// ('outcome', n) message; "blank-question" scrubs the question text.
/// Throws ConfigError for unknown names.
CorruptFn lookup_corruptor(const std::string& name);

struct FaultConfig {
  double loss_prob = 0.0;
  DelaySpec delay;
  double dup_prob = 0.0;
  int reorder_holdback = 0;  // 0 = off; k>0 holds a message until k later
                             // sends to the same target
  std::string corrupt_name;  // empty = off
  double corrupt_prob = 0.0;
  std::uint64_t seed = 1;
  FaultScope scope;

  bool any_enabled() const {
    return loss_prob > 0 || dup_prob > 0 || delay.kind != DelaySpec::Kind::None ||
           reorder_holdback > 0 || (!corrupt_name.empty() && corrupt_prob > 0);
  }

  /// Range-checks all fields; returns every problem found.
  std::vector<std::string> validate() const;
};

/// Normal form of one fault decision for a (message, target) pair.
struct DeliveryAction {
  bool dropped = false;
  Nanos delay = 0;
  std::optional<Value> payload;  // empty only for drops
  int times = 1;

  static DeliveryAction drop() { return {true, 0, std::nullopt, 0}; }
  static DeliveryAction deliver(Nanos delay, Value payload, int times = 1) {
    return {false, delay, std::move(payload), times};
  }
};

/// Draws from the seeded stream in fixed order (loss, duplication, delay,
/// corruption per copy) and returns the actions for this message/target.
/// Pure given the rng state; reordering is handled by the transport layer.
std::vector<DeliveryAction> decide(const FaultConfig& cfg, const Value& payload,
                                   const ProcessId& target, SplitMix64& rng);

struct FaultCounters {
  std::uint64_t decisions = 0;
  std::uint64_t dropped = 0;
  std::uint64_t extra_copies = 0;
  std::uint64_t delayed = 0;
  std::uint64_t corrupted = 0;
  std::uint64_t held = 0;
  std::uint64_t released = 0;
};

/// Transport layer applying a FaultConfig at the send boundary. Delayed and
/// duplicated copies are scheduled without blocking the sender; observation
/// envelopes never pass through here (the runtime routes them out-of-band).
class FaultLayer final : public TransportLayer {
 public:
  explicit FaultLayer(FaultConfig cfg);

  void on_send(const std::string& sender_kind, const Value& payload,
               const ProcessId& target, const Put& put) override;
  void flush() override;
  bool has_held() const override;

  FaultCounters counters() const;
  const FaultConfig& config() const { return cfg_; }

 private:
  bool in_scope(const std::string& sender_kind, const Value& payload) const;
  void route(const ProcessId& target, const DeliveryAction& a, const Put& put);

  FaultConfig cfg_;
  CorruptFn corrupt_;
  SplitMix64 rng_;
  mutable std::mutex mu_;
  FaultCounters counters_;

  struct Held {
    std::uint64_t msg_seq;
    Value payload;
    int times;
    Put put;
  };
  struct TargetState {
    std::uint64_t seq = 0;
    std::deque<Held> held;
  };
  std::map<ProcessId, TargetState> targets_;
};

/// Wraps the runtime's transport with a fault layer and returns it, so the
/// caller can read counters after the run.
std::shared_ptr<FaultLayer> wrap(Runtime& rt, const FaultConfig& cfg);

}  // namespace distcheck
