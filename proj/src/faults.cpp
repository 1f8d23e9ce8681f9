#include "distcheck/faults.hpp"

#include <algorithm>

namespace distcheck {

CorruptFn lookup_corruptor(const std::string& name) {
  if (name == "flip-outcome") {
    return [](const Value& v) -> Value {
      if (v.is(Value::Kind::Tuple) && v.items().size() == 2 &&
          v.items()[0].is(Value::Kind::Atom) && v.items()[0].as_atom() == "outcome" &&
          v.items()[1].is(Value::Kind::Int)) {
        return Value::tuple({v.items()[0], Value::integer(v.items()[1].as_int() + 1)});
      }
      return v;
    };
  }
  if (name == "blank-question") {
    return [](const Value& v) -> Value {
      if (v.is(Value::Kind::Tuple) && v.items().size() == 3 &&
          v.items()[0].is(Value::Kind::Atom) && v.items()[0].as_atom() == "question") {
        return Value::tuple({v.items()[0], Value::atom("_"), v.items()[2]});
      }
      return v;
    };
  }
  throw ConfigError({"unknown corruption transformer: '" + name + "'"});
}

std::vector<std::string> FaultConfig::validate() const {
  std::vector<std::string> problems;
  auto prob = [&](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0))
      problems.push_back(std::string(what) + " must be in [0,1], got " + std::to_string(p));
  };
  prob(loss_prob, "loss probability");
  prob(dup_prob, "duplication probability");
  prob(corrupt_prob, "corruption probability");
  switch (delay.kind) {
    case DelaySpec::Kind::None:
      break;
    case DelaySpec::Kind::Fixed:
      if (delay.fixed_secs < 0) problems.push_back("fixed delay must be non-negative");
      break;
    case DelaySpec::Kind::Uniform:
      if (delay.min_secs < 0 || delay.max_secs < delay.min_secs)
        problems.push_back("uniform delay bounds must satisfy 0 <= min <= max");
      break;
  }
  if (reorder_holdback < 0) problems.push_back("reorder holdback must be non-negative");
  if (!corrupt_name.empty()) {
    try {
      lookup_corruptor(corrupt_name);
    } catch (const ConfigError& e) {
      problems.insert(problems.end(), e.problems.begin(), e.problems.end());
    }
  }
  return problems;
}

std::vector<DeliveryAction> decide(const FaultConfig& cfg, const Value& payload,
                                   const ProcessId& target, SplitMix64& rng) {
  (void)target;
  if (cfg.loss_prob > 0 && rng.unit() < cfg.loss_prob) return {DeliveryAction::drop()};

  int copies = 1;
  if (cfg.dup_prob > 0 && rng.unit() < cfg.dup_prob) copies = 2;

  Nanos delay = 0;
  switch (cfg.delay.kind) {
    case DelaySpec::Kind::None:
      break;
    case DelaySpec::Kind::Fixed:
      delay = secs_to_nanos(cfg.delay.fixed_secs);
      break;
    case DelaySpec::Kind::Uniform:
      delay = secs_to_nanos(cfg.delay.min_secs +
                            (cfg.delay.max_secs - cfg.delay.min_secs) * rng.unit());
      break;
  }

  const bool corrupting = !cfg.corrupt_name.empty() && cfg.corrupt_prob > 0;
  CorruptFn corrupt;
  if (corrupting) corrupt = lookup_corruptor(cfg.corrupt_name);

  std::vector<DeliveryAction> out;
  for (int i = 0; i < copies; ++i) {
    Value pl = payload;
    if (corrupting && rng.unit() < cfg.corrupt_prob) pl = corrupt(payload);
    if (!out.empty() && !out.back().dropped && out.back().delay == delay &&
        *out.back().payload == pl) {
      out.back().times += 1;
    } else {
      out.push_back(DeliveryAction::deliver(delay, std::move(pl)));
    }
  }
  return out;
}

FaultLayer::FaultLayer(FaultConfig cfg)
    : cfg_(std::move(cfg)), rng_(SplitMix64::mix(cfg_.seed ^ 0x7a3b5c9d1e2f4455ULL)) {
  auto problems = cfg_.validate();
  if (!problems.empty()) throw ConfigError(std::move(problems));
  if (!cfg_.corrupt_name.empty()) corrupt_ = lookup_corruptor(cfg_.corrupt_name);
}

bool FaultLayer::in_scope(const std::string& sender_kind, const Value& payload) const {
  if (!cfg_.scope.sender_kinds.empty() && cfg_.scope.sender_kinds.count(sender_kind) == 0)
    return false;
  if (!cfg_.scope.payload_tags.empty()) {
    std::string tag;
    if (payload.is(Value::Kind::Atom)) {
      tag = payload.as_atom();
    } else if (payload.is(Value::Kind::Tuple) && !payload.items().empty() &&
               payload.items()[0].is(Value::Kind::Atom)) {
      tag = payload.items()[0].as_atom();
    }
    if (cfg_.scope.payload_tags.count(tag) == 0) return false;
  }
  return true;
}

void FaultLayer::on_send(const std::string& sender_kind, const Value& payload,
                         const ProcessId& target, const Put& put) {
  std::lock_guard<std::mutex> lk(mu_);
  if (!in_scope(sender_kind, payload)) {
    put(payload, 0);
    return;
  }
  counters_.decisions += 1;
  auto actions = decide(cfg_, payload, target, rng_);
  bool first = true;
  for (const auto& a : actions) {
    if (!a.dropped) {
      if (!(*a.payload == payload)) counters_.corrupted += static_cast<std::uint64_t>(a.times);
      counters_.extra_copies += static_cast<std::uint64_t>(a.times - (first ? 1 : 0));
      first = false;
    }
    route(target, a, put);
  }
}

void FaultLayer::route(const ProcessId& target, const DeliveryAction& a, const Put& put) {
  if (a.dropped) {
    counters_.dropped += 1;
    return;
  }
  if (a.delay > 0) {
    counters_.delayed += 1;
    for (int i = 0; i < a.times; ++i) put(*a.payload, a.delay);
    return;
  }
  if (cfg_.reorder_holdback <= 0) {
    for (int i = 0; i < a.times; ++i) put(*a.payload, 0);
    return;
  }
  // Per-target holdback: a message is held until `k` later messages to the
  // same target have been sent; with the hold buffer full, newer messages
  // pass straight through, which is what produces the inversions.
  auto& ts = targets_[target];
  ts.seq += 1;
  const std::uint64_t mseq = ts.seq;
  if (ts.held.size() < static_cast<std::size_t>(cfg_.reorder_holdback)) {
    ts.held.push_back({mseq, *a.payload, a.times, put});
    counters_.held += 1;
  } else {
    for (int i = 0; i < a.times; ++i) put(*a.payload, 0);
  }
  while (!ts.held.empty() &&
         ts.held.front().msg_seq + static_cast<std::uint64_t>(cfg_.reorder_holdback) <=
             ts.seq) {
    Held h = std::move(ts.held.front());
    ts.held.pop_front();
    counters_.released += 1;
    for (int i = 0; i < h.times; ++i) h.put(h.payload, 0);
  }
}

void FaultLayer::flush() {
  std::lock_guard<std::mutex> lk(mu_);
  for (auto& [target, ts] : targets_) {
    while (!ts.held.empty()) {
      Held h = std::move(ts.held.front());
      ts.held.pop_front();
      counters_.released += 1;
      for (int i = 0; i < h.times; ++i) h.put(h.payload, 0);
    }
  }
}

bool FaultLayer::has_held() const {
  std::lock_guard<std::mutex> lk(mu_);
  for (const auto& [target, ts] : targets_)
    if (!ts.held.empty()) return true;
  return false;
}

FaultCounters FaultLayer::counters() const {
  std::lock_guard<std::mutex> lk(mu_);
  return counters_;
}

std::shared_ptr<FaultLayer> wrap(Runtime& rt, const FaultConfig& cfg) {
  auto layer = std::make_shared<FaultLayer>(cfg);
  rt.set_transport_layer(layer);
  return layer;
}

}  // namespace distcheck
