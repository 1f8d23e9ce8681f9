#include "distcheck/polling.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

namespace distcheck {

namespace {

Value question_msg(const std::string& q, std::int64_t t) {
  return Value::tuple({Value::atom("question"), Value::text(q), Value::integer(t)});
}

Pattern reply_pattern(std::int64_t t) {
  return Pattern::tuple({Pattern::constant(Value::atom("reply")), Pattern::wildcard(),
                         Pattern::constant(Value::integer(t))});
}

Pattern outcome_pattern() {
  return Pattern::tuple({Pattern::constant(Value::atom("outcome")), Pattern::free("o")});
}

// Fig-style poller: send the question stamped with the current clock, wait
// for a reply from every pollee (any choice), then broadcast how many said 'Y'.
class Poller final : public Process {
 protected:
  void setup(const std::vector<Value>& args) override {
    for (const auto& v : args.at(0).items()) pollees_.push_back(v.as_pid());
    question_ = args.at(1).as_text();
  }

  void run() override {
    t_ = static_cast<std::int64_t>(logical_clock());
    send(question_msg(question_, t_), pollees_);
    await({{[this] { return all_replied(); }, [this] { announce(); }}});
  }

 private:
  bool all_replied() const {
    for (const auto& r : pollees_) {
      if (query_history(HistoryKind::Received, reply_pattern(t_),
                        Pattern::constant(Value::pid(r)))
              .empty())
        return false;
    }
    return true;
  }

  void announce() {
    Pattern yes = Pattern::tuple({Pattern::constant(Value::atom("reply")),
                                  Pattern::constant(Value::atom("Y")),
                                  Pattern::constant(Value::integer(t_))});
    std::vector<Value> who;
    for (const auto& env : query_history(HistoryKind::Received, yes, Pattern::free("r")))
      who.push_back(env.at("r"));
    Value yset = Value::set(std::move(who));
    output("-- received Y from: " + encode(yset));
    send(Value::tuple({Value::atom("outcome"),
                       Value::integer(static_cast<std::int64_t>(yset.items().size()))}),
         pollees_);
  }

  std::vector<ProcessId> pollees_;
  std::string question_;
  std::int64_t t_ = 0;
};

// Pollee: answer each question with a seeded Y/N choice, stop after the
// outcome arrives.
class Pollee final : public Process {
 public:
  Pollee() {
    on_receive(Pattern::tuple({Pattern::constant(Value::atom("question")),
                               Pattern::wildcard(), Pattern::free("t")}),
               [this](const Env& env, const Delivery& d) {
                 char c = pollee_choice(id(), seed_);
                 send(Value::tuple({Value::atom("reply"), Value::atom(std::string(1, c)),
                                    env.at("t")}),
                      d.sender);
               });
  }

 protected:
  void setup(const std::vector<Value>& args) override {
    seed_ = static_cast<std::uint64_t>(args.at(0).as_int());
  }

  void run() override {
    await({{[this] {
              return !query_history(HistoryKind::Received, outcome_pattern()).empty();
            },
            [this] {
              auto envs = query_history(HistoryKind::Received, outcome_pattern());
              output("== received outcome: " + encode(envs.front().at("o")));
            }}});
  }

 private:
  std::uint64_t seed_ = 0;
};

struct CheckerShared {
  ObservationLog log;
  std::atomic<bool> finalized{false};
  bool end_detected = false;
  std::optional<CheckResult> s1;
  std::optional<CheckResult> s2;
  std::vector<Violation> violations;
  int malformed = 0;
  int internal_errors = 0;
};

// External checker: ingests observation envelopes, arms the liveness
// timers, detects the end of polling, then evaluates the safety checks.
// Configured via an internal ('init', poller, {pollees}) message injected
// before start so the process ids it monitors exist by then.
class Checker final : public Process {
 public:
  Checker(ChecksConfig checks, TimeoutsConfig timeouts,
          std::shared_ptr<CheckerShared> out, std::function<void()> on_complete)
      : checks_(checks),
        timeouts_(timeouts),
        out_(std::move(out)),
        on_complete_(std::move(on_complete)) {
    on_receive(Pattern::wildcard(),
               [this](const Env&, const Delivery& d) { handle(d); });
  }

 protected:
  void run() override {
    await({{[this] { return out_->finalized.load() || end_now(); },
            [this] { finalize(true); }}});
  }

 private:
  LivenessMonitor::TimerStarter starter() {
    return [this](const std::string& name, Nanos bound) {
      runtime().schedule_timer(id(), name, bound);
    };
  }

  bool end_now() const {
    return configured_ && detect_end(out_->log, poller_, pollees_);
  }

  void handle(const Delivery& d) {
    if (out_->finalized) return;
    if (d.payload.is(Value::Kind::Atom) && d.payload.as_atom() == "finalize") {
      finalize(end_now());
      return;
    }
    if (auto tm = parse_timer_msg(d.payload)) {
      if (!monitor_) {
        out_->internal_errors += 1;
        return;
      }
      auto v = monitor_->on_timer(*tm, now(), out_->log);
      out_->internal_errors = monitor_->internal_errors();
      if (v) {
        std::ostringstream os;
        os << "!! deadline '" << v->name << "' missed: elapsed=" << nanos_to_secs(v->elapsed)
           << "s bound=" << nanos_to_secs(v->bound)
           << "s witness=" << (v->witness ? v->witness->str() : "{}");
        output(os.str());
        out_->violations.push_back(*v);
        if (tm->name == "total") finalize(false);
      }
      return;
    }
    if (d.payload.is(Value::Kind::Tuple) && !d.payload.items().empty() &&
        d.payload.items()[0].is(Value::Kind::Atom) &&
        d.payload.items()[0].as_atom() == "init") {
      configure(d.payload);
      return;
    }
    auto rec = parse_envelope(d.payload, d.sender, d.enqueue_time);
    if (!rec) {
      out_->malformed += 1;
      return;
    }
    out_->log.append(std::move(*rec));
    if (monitor_) monitor_->on_observation(out_->log[out_->log.size() - 1], starter());
  }

  void configure(const Value& init) {
    poller_ = init.items().at(1).as_pid();
    pollees_.clear();
    for (const auto& v : init.items().at(2).items()) pollees_.push_back(v.as_pid());
    if (timeouts_.any()) {
      monitor_.emplace(make_polling_liveness(timeouts_, poller_, pollees_));
      monitor_->arm(now(), starter());
    }
    configured_ = true;
  }

  void finalize(bool end) {
    if (out_->finalized) return;
    out_->end_detected = end;
    if (checks_.s1)
      out_->s1 = check_S1(out_->log, poller_, pollees_, checks_.strict_unique_question);
    if (checks_.s2) out_->s2 = check_S2(out_->log, poller_, pollees_);
    std::ostringstream os;
    os << "~~ polling " << (end ? "ended" : "did not end") << ". checking safety:";
    if (out_->s1) os << " " << (out_->s1->passed() ? "True" : "False");
    if (out_->s2) os << " " << (out_->s2->passed() ? "True" : "False");
    output(os.str());
    out_->finalized = true;
    if (on_complete_) on_complete_();
  }

  ChecksConfig checks_;
  TimeoutsConfig timeouts_;
  std::shared_ptr<CheckerShared> out_;
  std::function<void()> on_complete_;
  bool configured_ = false;
  ProcessId poller_;
  std::vector<ProcessId> pollees_;
  std::optional<LivenessMonitor> monitor_;
};

SingleRun run_one(const PollingScenario& s, int index, std::uint64_t seed,
                  bool instrumented, ProbeResult* probe) {
  auto wall_start = std::chrono::steady_clock::now();

  RuntimeConfig rc;
  rc.mode = s.mode;
  rc.logical_clocks = s.logical_clocks;
  rc.channel_order = s.channel_order;
  rc.seed = seed;
  Runtime rt(rc);

  std::mutex transcript_mu;
  std::vector<std::pair<ProcessId, std::string>> transcript;
  rt.set_output_sink([&](const ProcessId& pid, const std::string& line) {
    std::lock_guard<std::mutex> lk(transcript_mu);
    transcript.emplace_back(pid, line);
  });

  auto shared = std::make_shared<CheckerShared>();
  ProcessDef checker_def{"Checker",
                         [&s, shared, &rt] {
                           return std::make_unique<Checker>(s.checks, s.timeouts, shared,
                                                            [&rt] { rt.poke(); });
                         },
                         /*is_checker=*/true};
  ProcessId checker = rt.spawn(checker_def, {}, 1)[0];

  ProcessDef pollee_def{"R", [] { return std::make_unique<Pollee>(); }};
  ProcessDef poller_def{"P", [] { return std::make_unique<Poller>(); }};
  if (instrumented) {
    InstrumentationPolicy full = InstrumentationPolicy::full();
    InstrumentationPolicy pollee_policy = InstrumentationPolicy::full();
    pollee_policy.include_logical_time = false;  // pollee reports omit times
    poller_def = instrument(poller_def, checker, full);
    pollee_def = instrument(pollee_def, checker, pollee_policy);
  }

  std::vector<ProcessId> pollees =
      rt.spawn(pollee_def, {Value::integer(static_cast<std::int64_t>(seed))}, s.num_pollees);
  std::vector<Value> pollee_vals;
  for (const auto& r : pollees) pollee_vals.push_back(Value::pid(r));
  ProcessId poller =
      rt.spawn(poller_def, {Value::set(pollee_vals), Value::text(s.question)}, 1)[0];

  std::shared_ptr<FaultLayer> layer;
  if (s.faults.any_enabled()) {
    FaultConfig fc = s.faults;
    fc.seed = SplitMix64::mix(seed ^ fc.seed);
    layer = wrap(rt, fc);
  }

  rt.inject(checker, Value::tuple({Value::atom("init"), Value::pid(poller),
                                   Value::set(pollee_vals)}));
  rt.start({checker});
  rt.start(pollees);
  rt.start({poller});

  auto finalized = [&] { return shared->finalized.load(); };
  if (s.mode == ExecMode::Deterministic) {
    auto status = rt.run_until(finalized);
    if (status == Runtime::RunStatus::Quiescent && !finalized()) {
      rt.inject(checker, Value::atom("finalize"));
      rt.run_until(finalized);
    }
  } else {
    if (!rt.wait_until(finalized, secs_to_nanos(s.max_wall_secs))) {
      rt.inject(checker, Value::atom("finalize"));
      rt.wait_until(finalized, secs_to_nanos(5.0));
    }
  }

  rt.shutdown();

  if (probe) {
    for (const auto& pid : rt.pids()) {
      if (pid.kind == "Checker") continue;
      Process* p = rt.find(pid);
      probe->sent[pid] = p->sent_history();
      probe->received[pid] = p->received_history();
      probe->clocks[pid] = p->clock_trace();
    }
  }

  SingleRun run;
  run.index = index;
  run.seed = seed;
  run.end_detected = shared->end_detected;
  run.s1 = shared->s1;
  run.s2 = shared->s2;
  run.violations = shared->violations;
  if (layer) run.fault_counts = layer->counters();
  run.runtime_stats = rt.stats();
  run.log = std::shared_ptr<const ObservationLog>(shared, &shared->log);
  run.poller = poller;
  run.pollees = pollees;
  run.malformed_envelopes = shared->malformed;
  run.internal_errors = shared->internal_errors;
  {
    std::lock_guard<std::mutex> lk(transcript_mu);
    run.transcript = std::move(transcript);
  }
  LogQuery outcome_sent{Direction::Sent, Pattern::constant(Value::pid(poller)),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::free("o")}),
                        std::nullopt, std::nullopt};
  auto envs = observed(shared->log, outcome_sent);
  if (!envs.empty()) run.outcome = envs.front().at("o").as_int();
  run.wall_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                wall_start)
                      .count();
  return run;
}

void export_run_log(const PollingScenario& s, const SingleRun& run) {
  if (s.export_log.empty()) return;
  std::string path = s.export_log;
  if (s.runs > 1) path += ".run" + std::to_string(run.index + 1);
  std::ofstream os(path);
  if (!os) throw Error("cannot write log file: " + path);
  os << encode_log_meta(run, s) << '\n';
  write_log(os, *run.log);
}

}  // namespace

char pollee_choice(const ProcessId& pid, std::uint64_t seed) {
  std::uint64_t h = SplitMix64::mix(seed ^ (0x9e3779b97f4a7c15ULL * (pid.seq + 1)));
  return (h & 1) ? 'Y' : 'N';
}

std::uint64_t run_seed(const PollingScenario& s, int index) {
  return s.seed + static_cast<std::uint64_t>(index);
}

LivenessSpec make_polling_liveness(const TimeoutsConfig& t, const ProcessId& poller,
                                   const std::vector<ProcessId>& pollees) {
  LivenessSpec spec;
  if (t.q_r)
    spec.entries.push_back({"q-r", question_sent_query(poller),
                            first_reply_formula(poller, pollees), secs_to_nanos(*t.q_r)});
  if (t.q_o)
    spec.entries.push_back({"q-o", question_sent_query(poller), end_formula(pollees),
                            secs_to_nanos(*t.q_o)});
  if (t.total)
    spec.entries.push_back({"total", std::nullopt, end_formula(pollees),
                            secs_to_nanos(*t.total)});
  return spec;
}

std::vector<std::string> PollingScenario::validate() const {
  std::vector<std::string> problems;
  if (num_pollees < 1) problems.push_back("pollees must be at least 1");
  if (runs < 1) problems.push_back("runs must be at least 1");
  if (question.empty()) problems.push_back("question must be non-empty");
  if (checks.s1 && !logical_clocks)
    problems.push_back("S1 needs logical clocks (it compares logical timestamps)");
  auto fp = faults.validate();
  problems.insert(problems.end(), fp.begin(), fp.end());
  auto bound_ok = [&](const std::optional<double>& b, const char* name) {
    if (b && !(*b > 0))
      problems.push_back(std::string("timeout '") + name + "' must be positive");
  };
  bound_ok(timeouts.q_r, "q-r");
  bound_ok(timeouts.q_o, "q-o");
  bound_ok(timeouts.total, "total");
  if (!(max_wall_secs > 0)) problems.push_back("max wall seconds must be positive");
  return problems;
}

bool SingleRun::passed() const {
  if (s1 && !s1->passed()) return false;
  if (s2 && !s2->passed()) return false;
  if (!violations.empty()) return false;
  if (!runtime_stats.process_faults.empty()) return false;
  if (malformed_envelopes > 0 || internal_errors > 0) return false;
  return true;
}

bool RunReport::all_passed() const {
  for (const auto& r : runs)
    if (!r.passed()) return false;
  return true;
}

int RunReport::exit_code() const {
  for (const auto& r : runs)
    if (r.internal_errors > 0) return 3;
  return all_passed() ? 0 : 1;
}

RunReport run_polling(const PollingScenario& s) {
  auto problems = s.validate();
  if (!problems.empty()) throw ConfigError(std::move(problems));
  RunReport report;
  report.scenario = s;
  for (int i = 0; i < s.runs; ++i) {
    SingleRun run = run_one(s, i, run_seed(s, i), /*instrumented=*/true, nullptr);
    export_run_log(s, run);
    report.runs.push_back(std::move(run));
  }
  return report;
}

ProbeResult probe_polling(const PollingScenario& s, bool instrumented,
                          std::uint64_t seed_override) {
  auto problems = s.validate();
  if (!problems.empty()) throw ConfigError(std::move(problems));
  ProbeResult probe;
  std::uint64_t seed = seed_override ? seed_override : run_seed(s, 0);
  probe.run = run_one(s, 0, seed, instrumented, &probe);
  return probe;
}

std::string encode_log_meta(const SingleRun& run, const PollingScenario& s) {
  std::vector<Value> pollee_vals;
  for (const auto& r : run.pollees) pollee_vals.push_back(Value::pid(r));
  std::vector<Value> bounds;
  if (s.timeouts.q_r)
    bounds.push_back(Value::tuple(
        {Value::atom("q-r"), Value::integer(secs_to_nanos(*s.timeouts.q_r))}));
  if (s.timeouts.q_o)
    bounds.push_back(Value::tuple(
        {Value::atom("q-o"), Value::integer(secs_to_nanos(*s.timeouts.q_o))}));
  if (s.timeouts.total)
    bounds.push_back(Value::tuple(
        {Value::atom("total"), Value::integer(secs_to_nanos(*s.timeouts.total))}));
  Value meta = Value::tuple(
      {Value::atom("meta"), Value::pid(run.poller), Value::set(pollee_vals),
       Value::tuple(std::move(bounds)),
       Value::tuple({Value::atom("checks"), Value::integer(s.checks.s1 ? 1 : 0),
                     Value::integer(s.checks.s2 ? 1 : 0),
                     Value::integer(s.checks.strict_unique_question ? 1 : 0)})});
  return encode(meta);
}

}  // namespace distcheck
