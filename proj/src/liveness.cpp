#include "distcheck/liveness.hpp"

#include <set>

namespace distcheck {

std::vector<std::string> LivenessSpec::validate() const {
  std::vector<std::string> problems;
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (e.name.empty()) problems.push_back("liveness entry with empty name");
    if (!names.insert(e.name).second)
      problems.push_back("duplicate liveness entry name: '" + e.name + "'");
    if (e.bound <= 0)
      problems.push_back("liveness bound for '" + e.name + "' must be positive");
    if (!e.expected) problems.push_back("liveness entry '" + e.name + "' has no condition");
  }
  return problems;
}

const LivenessEntry* LivenessSpec::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::optional<TimerMsg> parse_timer_msg(const Value& payload) {
  if (!payload.is(Value::Kind::Tuple) || payload.items().size() != 3) return std::nullopt;
  const auto& parts = payload.items();
  if (!parts[0].is(Value::Kind::Atom) || parts[0].as_atom() != "timer") return std::nullopt;
  if (!parts[1].is(Value::Kind::Text) || !parts[2].is(Value::Kind::Int)) return std::nullopt;
  return TimerMsg{parts[1].as_text(), parts[2].as_int()};
}

LivenessMonitor::LivenessMonitor(LivenessSpec spec) : spec_(std::move(spec)) {
  auto problems = spec_.validate();
  if (!problems.empty()) throw ConfigError(std::move(problems));
  for (const auto& e : spec_.entries) state_[e.name] = Armed{};
}

void LivenessMonitor::arm(Nanos now, const TimerStarter& start) {
  for (const auto& e : spec_.entries) {
    if (e.trigger) continue;
    Armed& a = state_[e.name];
    if (a.started) continue;
    a.started = true;
    a.started_at = now;
    start(e.name, e.bound);
  }
}

void LivenessMonitor::on_observation(const ObservationRecord& rec, const TimerStarter& start) {
  for (const auto& e : spec_.entries) {
    if (!e.trigger) continue;
    Armed& a = state_[e.name];
    if (a.started) continue;  // one timer per entry, first match only
    auto m = match_record(*e.trigger, rec, Env{});
    if (!m) continue;
    a.started = true;
    a.started_at = rec.recv_time;
    a.trigger_env = std::move(*m);
    start(e.name, e.bound);
  }
}

std::optional<Violation> LivenessMonitor::on_timer(const TimerMsg& msg, Nanos now,
                                                   const ObservationLog& log) {
  const LivenessEntry* e = spec_.find(msg.name);
  auto it = state_.find(msg.name);
  if (!e || it == state_.end() || !it->second.started) {
    internal_errors_ += 1;
    return std::nullopt;
  }
  Armed& a = it->second;
  if (a.fired) {
    internal_errors_ += 1;  // timers are one-shot
    return std::nullopt;
  }
  a.fired = true;
  CheckResult r = eval(*e->expected, log, a.trigger_env);
  if (r.passed()) return std::nullopt;
  Violation v;
  v.name = e->name;
  v.elapsed = now - a.started_at;
  v.bound = e->bound;
  v.witness = r.witness;
  v.detail = r.detail;
  return v;
}

}  // namespace distcheck
