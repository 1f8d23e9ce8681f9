#include "distcheck/observe.hpp"

#include <algorithm>
#include <ostream>

namespace distcheck {

void ObservationLog::append(ObservationRecord rec) {
  if (!recs_.empty() && rec.recv_time < recs_.back().recv_time)
    rec.recv_time = recs_.back().recv_time;  // receipt stamps never regress
  recs_.push_back(std::move(rec));
}

Value apply_mask(const Pattern& mask, const Value& payload) {
  switch (mask.kind()) {
    case Pattern::Kind::Wildcard:
      return Value::atom("_");
    case Pattern::Kind::Tuple: {
      if (!payload.is(Value::Kind::Tuple) || payload.items().size() != mask.items().size())
        return payload;
      std::vector<Value> out;
      out.reserve(payload.items().size());
      for (std::size_t i = 0; i < payload.items().size(); ++i)
        out.push_back(apply_mask(mask.items()[i], payload.items()[i]));
      return Value::tuple(std::move(out));
    }
    default:
      return payload;
  }
}

Value make_envelope(Direction dir, const Value& payload, const std::vector<ProcessId>& peers,
                    std::optional<std::uint64_t> logical_time) {
  std::vector<Value> peer_vals;
  peer_vals.reserve(peers.size());
  for (const auto& p : peers) peer_vals.push_back(Value::pid(p));
  std::vector<Value> parts{Value::atom(dir == Direction::Sent ? "sent" : "rcvd"), payload,
                           Value::set(std::move(peer_vals))};
  if (logical_time)
    parts.push_back(Value::integer(static_cast<std::int64_t>(*logical_time)));
  return Value::tuple(std::move(parts));
}

ProcessDef instrument(const ProcessDef& def, const ProcessId& checker,
                      const InstrumentationPolicy& policy) {
  if (def.is_checker) throw Error("instrument: cannot instrument a checker definition");
  if (def.instrumented) throw Error("instrument: definition is already instrumented");
  ProcessDef out = def;
  out.instrumented = true;
  out.make = [inner = def.make, checker, policy]() {
    std::unique_ptr<Process> p = inner();
    if (!p) return p;
    p->set_send_hook([checker, policy](Process& self, const Value& payload,
                                       const std::vector<ProcessId>& targets,
                                       std::optional<std::uint64_t> stamp) {
      if (!policy.report_sends) return;
      Value body = policy.payload_mask ? apply_mask(*policy.payload_mask, payload) : payload;
      std::vector<ProcessId> peers = policy.include_peers ? targets : std::vector<ProcessId>{};
      self.send_internal(checker,
                         make_envelope(Direction::Sent, body, peers,
                                       policy.include_logical_time ? stamp : std::nullopt));
    });
    p->set_recv_hook([checker, policy](Process& self, const Delivery& d,
                                       const HistoryEntry& entry) {
      if (!policy.report_receives || d.internal) return;
      Value body = policy.payload_mask ? apply_mask(*policy.payload_mask, d.payload) : d.payload;
      self.send_internal(
          checker, make_envelope(Direction::Rcvd, body, {d.sender},
                                 policy.include_logical_time ? entry.logical_time
                                                             : std::nullopt));
    });
    return p;
  };
  return out;
}

std::optional<ObservationRecord> parse_envelope(const Value& envelope,
                                                const ProcessId& reporter, Nanos recv_time) {
  if (!envelope.is(Value::Kind::Tuple)) return std::nullopt;
  const auto& parts = envelope.items();
  if (parts.size() != 3 && parts.size() != 4) return std::nullopt;
  if (!parts[0].is(Value::Kind::Atom)) return std::nullopt;
  Direction dir;
  if (parts[0].as_atom() == "sent") dir = Direction::Sent;
  else if (parts[0].as_atom() == "rcvd") dir = Direction::Rcvd;
  else return std::nullopt;
  if (!parts[2].is(Value::Kind::Set)) return std::nullopt;
  std::vector<ProcessId> peers;
  for (const auto& pv : parts[2].items()) {
    if (!pv.is(Value::Kind::Pid)) return std::nullopt;
    peers.push_back(pv.as_pid());
  }
  std::sort(peers.begin(), peers.end());
  if (dir == Direction::Rcvd && peers.size() != 1) return std::nullopt;
  std::optional<std::uint64_t> lt;
  if (parts.size() == 4) {
    if (!parts[3].is(Value::Kind::Int) || parts[3].as_int() < 0) return std::nullopt;
    lt = static_cast<std::uint64_t>(parts[3].as_int());
  }
  return ObservationRecord{dir, parts[1], std::move(peers), reporter, lt, recv_time};
}

std::optional<Env> match_record(const LogQuery& q, const ObservationRecord& rec,
                                const Env& env) {
  if (rec.dir != q.dir) return std::nullopt;
  auto m = q.reporter.match(Value::pid(rec.reporter), env);
  if (!m) return std::nullopt;
  m = q.payload.match(rec.payload, *m);
  if (!m) return std::nullopt;
  if (q.peer) {
    std::optional<Env> pm;
    for (const auto& p : rec.peers) {
      pm = q.peer->match(Value::pid(p), *m);
      if (pm) break;
    }
    if (!pm) return std::nullopt;
    m = std::move(pm);
  }
  if (q.time) {
    if (!rec.logical_time) return std::nullopt;
    m = q.time->match(Value::integer(static_cast<std::int64_t>(*rec.logical_time)), *m);
    if (!m) return std::nullopt;
  }
  return m;
}

std::vector<Env> observed(const ObservationLog& log, const LogQuery& q, const Env& env) {
  std::vector<Env> out;
  for (const auto& rec : log) {
    if (auto m = match_record(q, rec, env)) out.push_back(std::move(*m));
  }
  return out;
}

std::string encode_record(const ObservationRecord& rec) {
  std::vector<Value> peer_vals;
  peer_vals.reserve(rec.peers.size());
  for (const auto& p : rec.peers) peer_vals.push_back(Value::pid(p));
  std::vector<Value> parts{
      Value::atom("obs"),
      Value::atom(rec.dir == Direction::Sent ? "sent" : "rcvd"),
      Value::pid(rec.reporter),
      rec.payload,
      Value::set(std::move(peer_vals)),
      rec.logical_time ? Value::integer(static_cast<std::int64_t>(*rec.logical_time))
                       : Value::atom("none"),
      Value::integer(rec.recv_time)};
  return encode(Value::tuple(std::move(parts)));
}

ObservationRecord decode_record(std::string_view line) {
  Value v = decode(line);
  auto bad = [&](const char* why) -> DecodeError { return DecodeError(0, why); };
  if (!v.is(Value::Kind::Tuple) || v.items().size() != 7) throw bad("record must be a 7-tuple");
  const auto& parts = v.items();
  if (!parts[0].is(Value::Kind::Atom) || parts[0].as_atom() != "obs")
    throw bad("record must start with 'obs'");
  ObservationRecord rec{Direction::Sent, parts[3], {}, {}, std::nullopt, 0};
  const std::string& d = parts[1].as_atom();
  if (d == "sent") rec.dir = Direction::Sent;
  else if (d == "rcvd") rec.dir = Direction::Rcvd;
  else throw bad("bad direction");
  rec.reporter = parts[2].as_pid();
  for (const auto& pv : parts[4].items()) rec.peers.push_back(pv.as_pid());
  std::sort(rec.peers.begin(), rec.peers.end());
  if (parts[5].is(Value::Kind::Int)) {
    if (parts[5].as_int() < 0) throw bad("negative logical time");
    rec.logical_time = static_cast<std::uint64_t>(parts[5].as_int());
  }
  rec.recv_time = parts[6].as_int();
  return rec;
}

void write_log(std::ostream& os, const ObservationLog& log) {
  for (const auto& rec : log) os << encode_record(rec) << '\n';
}

}  // namespace distcheck
