#include "distcheck/replay.hpp"

#include <fstream>

namespace distcheck {

namespace {

struct Meta {
  ProcessId poller;
  std::vector<ProcessId> pollees;
  std::vector<std::pair<std::string, Nanos>> bounds;
  ChecksConfig checks;
};

Meta parse_meta(const Value& v) {
  if (!v.is(Value::Kind::Tuple) || v.items().size() != 5 ||
      !v.items()[0].is(Value::Kind::Atom) || v.items()[0].as_atom() != "meta")
    throw Error("log file does not start with a meta line");
  Meta m;
  m.poller = v.items()[1].as_pid();
  for (const auto& p : v.items()[2].items()) m.pollees.push_back(p.as_pid());
  for (const auto& b : v.items()[3].items())
    m.bounds.emplace_back(b.items().at(0).as_atom(), b.items().at(1).as_int());
  const auto& c = v.items()[4].items();
  m.checks.s1 = c.at(1).as_int() != 0;
  m.checks.s2 = c.at(2).as_int() != 0;
  m.checks.strict_unique_question = c.at(3).as_int() != 0;
  return m;
}

ObservationLog prefix_until(const ObservationLog& log, Nanos cutoff) {
  ObservationLog out;
  for (const auto& rec : log) {
    if (rec.recv_time <= cutoff) out.append(rec);
  }
  return out;
}

}  // namespace

RunReport replay(const std::string& path, const ReplayChecks& checks) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open log file: " + path);

  std::string line;
  int lineno = 0;
  Meta meta;
  auto log = std::make_shared<ObservationLog>();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      if (lineno == 1) {
        meta = parse_meta(decode(line));
      } else {
        log->append(decode_record(line));
      }
    } catch (const std::exception& e) {
      throw Error("log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (lineno == 0) throw Error("log file is empty: " + path);

  SingleRun run;
  run.index = 0;
  run.poller = meta.poller;
  run.pollees = meta.pollees;
  run.log = log;
  run.end_detected = detect_end(*log, meta.poller, meta.pollees);
  if (checks.s1 && meta.checks.s1)
    run.s1 = check_S1(*log, meta.poller, meta.pollees, meta.checks.strict_unique_question);
  if (checks.s2 && meta.checks.s2) run.s2 = check_S2(*log, meta.poller, meta.pollees);

  TimeoutsConfig timeouts;
  if (checks.liveness) {
    for (const auto& [name, bound] : meta.bounds) {
      FormulaPtr expected;
      Env trigger_env;
      Nanos t0 = 0;
      bool armed = false;
      if (name == "total") {
        expected = end_formula(meta.pollees);
        timeouts.total = nanos_to_secs(bound);
        armed = true;
      } else {
        expected = name == "q-r" ? first_reply_formula(meta.poller, meta.pollees)
                                 : end_formula(meta.pollees);
        (name == "q-r" ? timeouts.q_r : timeouts.q_o) = nanos_to_secs(bound);
        LogQuery trigger = question_sent_query(meta.poller);
        for (const auto& rec : *log) {
          if (auto m = match_record(trigger, rec, Env{})) {
            trigger_env = std::move(*m);
            t0 = rec.recv_time;
            armed = true;
            break;
          }
        }
      }
      if (!armed) continue;
      ObservationLog prefix = prefix_until(*log, t0 + bound);
      CheckResult r = eval(*expected, prefix, trigger_env);
      if (!r.passed())
        run.violations.push_back({name, bound, bound, r.witness, r.detail});
    }
  }

  LogQuery outcome_sent{Direction::Sent, Pattern::constant(Value::pid(meta.poller)),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::free("o")}),
                        std::nullopt, std::nullopt};
  auto envs = observed(*log, outcome_sent);
  if (!envs.empty()) run.outcome = envs.front().at("o").as_int();

  RunReport report;
  report.replayed = true;
  report.scenario.num_pollees = static_cast<int>(meta.pollees.size());
  report.scenario.checks = meta.checks;
  report.scenario.checks.s1 = meta.checks.s1 && checks.s1;
  report.scenario.checks.s2 = meta.checks.s2 && checks.s2;
  report.scenario.timeouts = timeouts;
  report.scenario.runs = 1;
  report.runs.push_back(std::move(run));
  return report;
}

}  // namespace distcheck
