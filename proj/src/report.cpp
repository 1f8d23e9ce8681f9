#include <cstdio>
#include <ostream>
#include <sstream>

#include "distcheck/polling.hpp"

namespace distcheck {

namespace {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

Value kv(const std::string& k, Value v) {
  return Value::tuple({Value::atom(k), std::move(v)});
}

struct ReportLine {
  std::string human;
  std::string tag;
  Value payload;
  bool realtime = false;
};

std::string delay_str(const DelaySpec& d) {
  switch (d.kind) {
    case DelaySpec::Kind::None:
      return "none";
    case DelaySpec::Kind::Fixed:
      return "fixed:" + fmt_double(d.fixed_secs);
    case DelaySpec::Kind::Uniform:
      return "uniform:" + fmt_double(d.min_secs) + "," + fmt_double(d.max_secs);
  }
  return "none";
}

Value scenario_value(const PollingScenario& s) {
  std::vector<Value> parts;
  parts.push_back(kv("pollees", Value::integer(s.num_pollees)));
  parts.push_back(kv("runs", Value::integer(s.runs)));
  parts.push_back(kv("mode", Value::atom(s.mode == ExecMode::Deterministic ? "det" : "conc")));
  parts.push_back(kv("seed", Value::integer(static_cast<std::int64_t>(s.seed))));
  parts.push_back(kv("order", Value::atom(s.channel_order == ChannelOrder::Fifo
                                              ? "fifo"
                                              : "arbitrary")));
  parts.push_back(kv("clocks", Value::integer(s.logical_clocks ? 1 : 0)));
  parts.push_back(kv("question", Value::text(s.question)));
  parts.push_back(kv("s1", Value::integer(s.checks.s1 ? 1 : 0)));
  parts.push_back(kv("s2", Value::integer(s.checks.s2 ? 1 : 0)));
  parts.push_back(kv("strict", Value::integer(s.checks.strict_unique_question ? 1 : 0)));
  std::vector<Value> bounds;
  if (s.timeouts.q_r) bounds.push_back(kv("q-r", Value::text(fmt_double(*s.timeouts.q_r))));
  if (s.timeouts.q_o) bounds.push_back(kv("q-o", Value::text(fmt_double(*s.timeouts.q_o))));
  if (s.timeouts.total)
    bounds.push_back(kv("total", Value::text(fmt_double(*s.timeouts.total))));
  parts.push_back(kv("timeouts", Value::tuple(std::move(bounds))));
  parts.push_back(kv("loss", Value::text(fmt_double(s.faults.loss_prob))));
  parts.push_back(kv("dup", Value::text(fmt_double(s.faults.dup_prob))));
  parts.push_back(kv("delay", Value::text(delay_str(s.faults.delay))));
  parts.push_back(kv("reorder", Value::integer(s.faults.reorder_holdback)));
  parts.push_back(kv("corrupt", Value::text(s.faults.corrupt_name)));
  parts.push_back(kv("corrupt_prob", Value::text(fmt_double(s.faults.corrupt_prob))));
  parts.push_back(kv("fault_seed", Value::integer(static_cast<std::int64_t>(s.faults.seed))));
  return Value::tuple(std::move(parts));
}

std::string scenario_human(const PollingScenario& s) {
  std::ostringstream os;
  os << "## polling: pollees=" << s.num_pollees << " runs=" << s.runs
     << " mode=" << (s.mode == ExecMode::Deterministic ? "det" : "conc")
     << " seed=" << s.seed
     << " order=" << (s.channel_order == ChannelOrder::Fifo ? "fifo" : "arbitrary")
     << " clocks=" << (s.logical_clocks ? "on" : "off") << " s1=" << s.checks.s1
     << " s2=" << s.checks.s2 << " strict=" << s.checks.strict_unique_question;
  if (s.timeouts.q_r) os << " q-r=" << fmt_double(*s.timeouts.q_r);
  if (s.timeouts.q_o) os << " q-o=" << fmt_double(*s.timeouts.q_o);
  if (s.timeouts.total) os << " total=" << fmt_double(*s.timeouts.total);
  os << " | faults: loss=" << fmt_double(s.faults.loss_prob)
     << " dup=" << fmt_double(s.faults.dup_prob) << " delay=" << delay_str(s.faults.delay)
     << " reorder=" << s.faults.reorder_holdback << " corrupt="
     << (s.faults.corrupt_name.empty() ? "off" : s.faults.corrupt_name + ":" +
                                                     fmt_double(s.faults.corrupt_prob))
     << " fault_seed=" << s.faults.seed;
  return os.str();
}

Value witness_value(const std::optional<Env>& w) {
  return w ? w->to_value() : Value::tuple({});
}

void check_lines(std::vector<ReportLine>& out, int run_index, const char* name,
                 const std::optional<CheckResult>& r) {
  if (!r) return;
  std::ostringstream os;
  os << "** run " << run_index + 1 << ": " << name << " "
     << (r->passed() ? "pass" : "fail");
  if (!r->passed() && r->witness) os << " witness=" << r->witness->str();
  if (!r->passed() && !r->detail.empty()) os << " (" << r->detail << ")";
  out.push_back({os.str(), name,
                 Value::tuple({kv("run", Value::integer(run_index + 1)),
                               kv("verdict", Value::atom(r->passed() ? "pass" : "fail")),
                               kv("witness", witness_value(r->witness))}),
                 false});
}

std::vector<ReportLine> build_lines(const RunReport& report) {
  std::vector<ReportLine> out;
  out.push_back({scenario_human(report.scenario), "SCENARIO",
                 scenario_value(report.scenario), false});
  int passed = 0, s1p = 0, s1f = 0, s2p = 0, s2f = 0, ends = 0;
  std::size_t violations = 0;
  for (const auto& run : report.runs) {
    int n = run.index + 1;
    out.push_back({"-- run " + std::to_string(n) + " (seed " + std::to_string(run.seed) + ")",
                   "RUNSTART",
                   Value::tuple({kv("run", Value::integer(n)),
                                 kv("seed", Value::integer(static_cast<std::int64_t>(run.seed)))}),
                   false});
    for (const auto& [pid, line] : run.transcript) {
      out.push_back({"[" + pid.str() + "] " + line, "OUT",
                     Value::tuple({kv("run", Value::integer(n)), kv("pid", Value::pid(pid)),
                                   kv("line", Value::text(line))}),
                     false});
    }
    out.push_back({std::string("~~ run ") + std::to_string(n) + ": end " +
                       (run.end_detected ? "detected" : "NOT detected"),
                   "END",
                   Value::tuple({kv("run", Value::integer(n)),
                                 kv("end", Value::integer(run.end_detected ? 1 : 0))}),
                   false});
    if (run.end_detected) ends += 1;
    check_lines(out, run.index, "S1", run.s1);
    check_lines(out, run.index, "S2", run.s2);
    if (run.s1) (run.s1->passed() ? s1p : s1f) += 1;
    if (run.s2) (run.s2->passed() ? s2p : s2f) += 1;
    for (const auto& v : run.violations) {
      std::ostringstream os;
      os << "!! run " << n << ": VIOLATION " << v.name << " elapsed="
         << fmt_double(nanos_to_secs(v.elapsed)) << "s bound="
         << fmt_double(nanos_to_secs(v.bound)) << "s witness="
         << (v.witness ? v.witness->str() : "{}");
      out.push_back({os.str(), "VIOLATION",
                     Value::tuple({kv("run", Value::integer(n)), kv("name", Value::text(v.name)),
                                   kv("elapsed_ns", Value::integer(v.elapsed)),
                                   kv("bound_ns", Value::integer(v.bound)),
                                   kv("witness", witness_value(v.witness))}),
                     false});
    }
    violations += run.violations.size();
    {
      const auto& fc = run.fault_counts;
      std::ostringstream os;
      os << ".. run " << n << ": faults: decisions=" << fc.decisions
         << " dropped=" << fc.dropped << " extra_copies=" << fc.extra_copies
         << " delayed=" << fc.delayed << " corrupted=" << fc.corrupted
         << " held=" << fc.held << " undeliverable=" << run.runtime_stats.undeliverable;
      out.push_back(
          {os.str(), "FAULTS",
           Value::tuple(
               {kv("run", Value::integer(n)),
                kv("decisions", Value::integer(static_cast<std::int64_t>(fc.decisions))),
                kv("dropped", Value::integer(static_cast<std::int64_t>(fc.dropped))),
                kv("extra_copies", Value::integer(static_cast<std::int64_t>(fc.extra_copies))),
                kv("delayed", Value::integer(static_cast<std::int64_t>(fc.delayed))),
                kv("corrupted", Value::integer(static_cast<std::int64_t>(fc.corrupted))),
                kv("held", Value::integer(static_cast<std::int64_t>(fc.held))),
                kv("undeliverable", Value::integer(run.runtime_stats.undeliverable))}),
           false});
    }
    for (const auto& [pid, what] : run.runtime_stats.process_faults) {
      out.push_back({"!! run " + std::to_string(n) + ": process fault " + pid.str() + ": " + what,
                     "PROCFAULT",
                     Value::tuple({kv("run", Value::integer(n)), kv("pid", Value::pid(pid)),
                                   kv("what", Value::text(what))}),
                     false});
    }
    {
      std::ostringstream os;
      os << ".. run " << n << ": wall " << fmt_double(run.wall_secs) << "s";
      out.push_back({os.str(), "WALL",
                     Value::tuple({kv("run", Value::integer(n)),
                                   kv("wall_ns", Value::integer(secs_to_nanos(run.wall_secs)))}),
                     true});
    }
    if (run.passed()) passed += 1;
  }
  {
    std::ostringstream os;
    os << "== aggregate: passed " << passed << "/" << report.runs.size() << " | S1 " << s1p
       << " pass / " << s1f << " fail | S2 " << s2p << " pass / " << s2f
       << " fail | violations " << violations << " | end detected " << ends << "/"
       << report.runs.size();
    out.push_back(
        {os.str(), "AGG",
         Value::tuple({kv("runs", Value::integer(static_cast<std::int64_t>(report.runs.size()))),
                       kv("passed", Value::integer(passed)),
                       kv("s1_pass", Value::integer(s1p)), kv("s1_fail", Value::integer(s1f)),
                       kv("s2_pass", Value::integer(s2p)), kv("s2_fail", Value::integer(s2f)),
                       kv("violations", Value::integer(static_cast<std::int64_t>(violations))),
                       kv("end_detected", Value::integer(ends))}),
         false});
  }
  out.push_back({"== exit code " + std::to_string(report.exit_code()), "EXIT",
                 Value::tuple({kv("code", Value::integer(report.exit_code()))}), false});
  return out;
}

}  // namespace

void print_report(std::ostream& os, const RunReport& report) {
  for (const auto& line : build_lines(report)) {
    os << line.human << '\n';
    os << "#: " << line.tag << " " << encode(line.payload) << '\n';
  }
}

std::vector<std::string> machine_lines(const RunReport& report, bool include_realtime) {
  std::vector<std::string> out;
  for (const auto& line : build_lines(report)) {
    if (line.realtime && !include_realtime) continue;
    out.push_back("#: " + line.tag + " " + encode(line.payload));
  }
  return out;
}

}  // namespace distcheck
