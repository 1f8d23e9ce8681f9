#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <set>

#include "distcheck/runtime.hpp"

using namespace distcheck;

namespace {

// Scriptable process for driving the runtime from tests.
class Scripted : public Process {
 public:
  std::function<void(Scripted&)> body;
  std::function<void(Scripted&, const std::vector<Value>&)> on_setup;

  using Process::await;
  using Process::on_receive;
  using Process::send;

 protected:
  void setup(const std::vector<Value>& args) override {
    if (on_setup) on_setup(*this, args);
  }
  void run() override {
    if (body) body(*this);
  }
};

ProcessDef scripted_def(const std::string& kind,
                        std::function<void(Scripted&)> configure) {
  return ProcessDef{kind, [configure] {
                      auto p = std::make_unique<Scripted>();
                      if (configure) configure(*p);
                      return std::unique_ptr<Process>(std::move(p));
                    }};
}

RuntimeConfig det_cfg(std::uint64_t seed = 1) {
  RuntimeConfig cfg;
  cfg.mode = ExecMode::Deterministic;
  cfg.seed = seed;
  return cfg;
}

Value msg(std::int64_t n) { return Value::tuple({Value::atom("m"), Value::integer(n)}); }

// stays alive until n messages are processed
void await_received(Scripted& self, std::size_t n) {
  self.await({{[&self, n] { return self.received_history().size() >= n; }, {}}}, 10.0, {});
}

}  // namespace

TEST_CASE("spawn creates distinct set-up processes that run only after start") {
  Runtime rt(det_cfg());
  auto def = scripted_def("R", {});
  auto pids = rt.spawn(def, {Value::integer(42)}, 10);
  CHECK(pids.size() == 10);
  std::set<ProcessId> uniq(pids.begin(), pids.end());
  CHECK(uniq.size() == 10);
  for (const auto& pid : pids) {
    CHECK(rt.find(pid) != nullptr);
    CHECK_FALSE(rt.find(pid)->done());
  }
  auto one = rt.spawn(def, {});
  CHECK(one.size() == 1);  // default count
}

TEST_CASE("spawning zero processes is rejected") {
  Runtime rt(det_cfg());
  CHECK_THROWS_AS(rt.spawn(scripted_def("R", {}), {}, 0), Error);
  CHECK_THROWS_AS(rt.spawn(ProcessDef{"R", nullptr}, {}, 1), Error);
}

TEST_CASE("duplicate start is rejected") {
  Runtime rt(det_cfg());
  auto pids = rt.spawn(scripted_def("R", {}), {});
  rt.start(pids);
  CHECK_THROWS_AS(rt.start(pids), Error);
}

TEST_CASE("multicast: one history entry, one delivery per target, one clock tick") {
  Runtime rt(det_cfg());
  auto stay = scripted_def("R", [](Scripted& p) {
    p.body = [](Scripted& self) { await_received(self, 1); };
  });
  auto targets = rt.spawn(stay, {}, 10);
  auto sender = rt.spawn(scripted_def("P",
                                      [&](Scripted& p) {
                                        auto to = targets;
                                        p.body = [to](Scripted& self) { self.send(msg(1), to); };
                                      }),
                         {});
  rt.start(targets);
  rt.start(sender);
  rt.run_until({});
  Process* p = rt.find(sender[0]);
  REQUIRE(p->sent_history().size() == 1);
  CHECK(p->sent_history()[0].peers.size() == 10);
  CHECK(p->sent_history()[0].logical_time == 1);  // first send of a fresh process
  CHECK(p->logical_clock() == 1);
  for (const auto& t : targets) {
    CHECK(rt.find(t)->received_history().size() == 1);
  }
}

TEST_CASE("send to the empty set still ticks the clock and records history") {
  Runtime rt(det_cfg());
  auto sender = rt.spawn(
      scripted_def("P",
                   [](Scripted& p) {
                     p.body = [](Scripted& self) { self.send(msg(1), std::vector<ProcessId>{}); };
                   }),
      {});
  rt.start(sender);
  rt.run_until({});
  Process* p = rt.find(sender[0]);
  REQUIRE(p->sent_history().size() == 1);
  CHECK(p->sent_history()[0].peers.empty());
  CHECK(p->logical_clock() == 1);
}

TEST_CASE("receive applies the Lamport max rule") {
  // receiver reaches clock 2 via two sends, then handles a message stamped 3
  Runtime rt(det_cfg());
  auto recv = rt.spawn(scripted_def("B",
                                    [](Scripted& p) {
                                      p.body = [](Scripted& self) {
                                        self.send(msg(0), std::vector<ProcessId>{});
                                        self.send(msg(0), std::vector<ProcessId>{});
                                        await_received(self, 1);
                                      };
                                    }),
                       {});
  auto sender = rt.spawn(scripted_def("A",
                                      [&](Scripted& p) {
                                        auto to = recv;
                                        p.body = [to](Scripted& self) {
                                          self.send(msg(0), std::vector<ProcessId>{});
                                          self.send(msg(0), std::vector<ProcessId>{});
                                          self.send(msg(7), to);  // stamp 3
                                        };
                                      }),
                         {});
  rt.start(recv);
  rt.start(sender);
  rt.run_until({});
  Process* r = rt.find(recv[0]);
  REQUIRE(r->received_history().size() == 1);
  CHECK(r->received_history()[0].logical_time == 4);  // max(2,3)+1
  CHECK(r->logical_clock() == 4);
  const auto& trace = r->clock_trace();
  REQUIRE(trace.size() == 3);
  CHECK(trace[2].kind == ClockEvent::Kind::Recv);
  CHECK(trace[2].msg_stamp == 3);
  CHECK(trace[2].clock_after == 4);
}

TEST_CASE("logical clock reads do not modify the counter; disabled clocks throw") {
  Runtime rt(det_cfg());
  auto pid = rt.spawn(scripted_def("P", {}), {})[0];
  CHECK(rt.find(pid)->logical_clock() == 0);
  CHECK(rt.find(pid)->logical_clock() == 0);

  RuntimeConfig noclocks = det_cfg();
  noclocks.logical_clocks = false;
  Runtime rt2(noclocks);
  auto pid2 = rt2.spawn(scripted_def("P", {}), {})[0];
  CHECK_THROWS_AS(rt2.find(pid2)->logical_clock(), Error);
}

TEST_CASE("every matching receive clause runs, in arrival order") {
  Runtime rt(det_cfg());
  std::vector<std::int64_t> seen;
  int clause2 = 0;
  auto recv = rt.spawn(
      scripted_def("B",
                   [&](Scripted& p) {
                     p.on_receive(Pattern::tuple({Pattern::constant(Value::atom("m")),
                                                  Pattern::free("n")}),
                                  [&seen](const Env& env, const Delivery&) {
                                    seen.push_back(env.at("n").as_int());
                                  });
                     p.on_receive(Pattern::tuple({Pattern::constant(Value::atom("m")),
                                                  Pattern::constant(Value::integer(2))}),
                                  [&clause2](const Env&, const Delivery&) { ++clause2; });
                     p.body = [](Scripted& self) { await_received(self, 3); };
                   }),
      {});
  auto sender = rt.spawn(scripted_def("A",
                                      [&](Scripted& p) {
                                        auto to = recv[0];
                                        p.body = [to](Scripted& self) {
                                          self.send(msg(1), to);
                                          self.send(msg(2), to);
                                          self.send(msg(3), to);
                                        };
                                      }),
                         {});
  rt.start(recv);
  rt.start(sender);
  rt.run_until({});
  CHECK(seen == std::vector<std::int64_t>{1, 2, 3});  // FIFO per sender
  CHECK(clause2 == 1);
}

TEST_CASE("await fires the first listed branch when several are true") {
  Runtime rt(det_cfg());
  int fired = -1;
  auto pid = rt.spawn(scripted_def("P",
                                   [&](Scripted& p) {
                                     p.body = [&fired](Scripted& self) {
                                       self.await({{[] { return true; },
                                                    [&fired] { fired = 0; }},
                                                   {[] { return true; },
                                                    [&fired] { fired = 1; }}});
                                     };
                                   }),
                      {});
  rt.start(pid);
  rt.run_until({});
  CHECK(fired == 0);
  CHECK(rt.find(pid[0])->last_await_branch() == 0);
  CHECK(rt.find(pid[0])->done());
}

TEST_CASE("await with an unsatisfiable predicate times out at the virtual deadline") {
  Runtime rt(det_cfg());
  Nanos fired_at = -1;
  auto pid = rt.spawn(
      scripted_def("P",
                   [&](Scripted& p) {
                     p.body = [&fired_at, &rt](Scripted& self) {
                       self.await({{[] { return false; }, {}}}, 0.01,
                                  [&fired_at, &rt] { fired_at = rt.now(); });
                     };
                   }),
      {});
  rt.start(pid);
  auto status = rt.run_until({});
  CHECK(status == Runtime::RunStatus::Quiescent);
  CHECK(fired_at == secs_to_nanos(0.01));
  CHECK(rt.find(pid[0])->last_await_branch() == Process::kTimeoutBranch);
}

TEST_CASE("await with nothing to wait for is an error that faults the process") {
  Runtime rt(det_cfg());
  auto pid = rt.spawn(scripted_def("P",
                                   [](Scripted& p) {
                                     p.body = [](Scripted& self) { self.await({}); };
                                   }),
                      {});
  rt.start(pid);
  rt.run_until({});
  CHECK(rt.find(pid[0])->faulted());
  auto stats = rt.stats();
  REQUIRE(stats.process_faults.size() == 1);
  CHECK(stats.process_faults[0].first == pid[0]);
}

TEST_CASE("handler exceptions terminate only the faulting process") {
  Runtime rt(det_cfg());
  auto bad = rt.spawn(scripted_def("B",
                                   [](Scripted& p) {
                                     p.on_receive(Pattern::wildcard(),
                                                  [](const Env&, const Delivery&) {
                                                    throw Error("boom");
                                                  });
                                     p.body = [](Scripted& self) {
                                       self.await({{[] { return false; }, {}}}, 10.0, {});
                                     };
                                   }),
                      {});
  auto ok = rt.spawn(scripted_def("G",
                                  [&](Scripted& p) {
                                    auto to = bad[0];
                                    p.body = [to](Scripted& self) {
                                      self.send(msg(1), to);
                                      self.send(msg(2), std::vector<ProcessId>{});
                                    };
                                  }),
                     {});
  rt.start(bad);
  rt.start(ok);
  rt.run_until({});
  CHECK(rt.find(bad[0])->faulted());
  CHECK(rt.find(ok[0])->done());
  CHECK_FALSE(rt.find(ok[0])->faulted());
  auto stats = rt.stats();
  REQUIRE(stats.process_faults.size() == 1);
  CHECK(stats.process_faults[0].second == std::string("boom"));
}

TEST_CASE("sending to an unknown process id is reported and dropped") {
  Runtime rt(det_cfg());
  auto pid = rt.spawn(scripted_def("P",
                                   [](Scripted& p) {
                                     p.body = [](Scripted& self) {
                                       self.send(msg(1), ProcessId{"X", 0xffff});
                                     };
                                   }),
                      {});
  rt.start(pid);
  rt.run_until({});
  CHECK(rt.stats().undeliverable == 1);
  CHECK(rt.find(pid[0])->sent_history().size() == 1);  // send itself is recorded
}

TEST_CASE("query_history over a scripted exchange") {
  Runtime rt(det_cfg());
  auto replies = scripted_def("B", [](Scripted& p) {
    Scripted* self = &p;
    p.on_receive(Pattern::tuple({Pattern::constant(Value::atom("question")),
                                 Pattern::wildcard(), Pattern::free("t")}),
                 [self](const Env& env, const Delivery& d) {
                   self->send(
                       Value::tuple({Value::atom("reply"), Value::atom("Y"), env.at("t")}),
                       d.sender);
                 });
    p.body = [](Scripted& s) { await_received(s, 1); };
  });
  auto rs = rt.spawn(replies, {}, 2);
  auto poller = rt.spawn(
      scripted_def("P",
                   [&](Scripted& p) {
                     auto to = rs;
                     p.body = [to](Scripted& self) {
                       self.send(Value::tuple({Value::atom("question"), Value::text("q?"),
                                               Value::integer(0)}),
                                 to);
                       await_received(self, to.size());
                     };
                   }),
      {});
  rt.start(rs);
  rt.start(poller);
  rt.run_until({});
  Process* p = rt.find(poller[0]);

  // one Env per distinct replying pollee
  auto envs = p->query_history(HistoryKind::Received,
                               Pattern::tuple({Pattern::constant(Value::atom("reply")),
                                               Pattern::constant(Value::atom("Y")),
                                               Pattern::constant(Value::integer(0))}),
                               Pattern::free("r"));
  CHECK(envs.size() == 2);
  std::set<std::string> repliers;
  for (const auto& e : envs) repliers.insert(encode(e.at("r")));
  CHECK(repliers.size() == 2);

  // sent question: exactly one Env binding t
  auto sent = p->query_history(HistoryKind::Sent,
                               Pattern::tuple({Pattern::constant(Value::atom("question")),
                                               Pattern::wildcard(), Pattern::free("t")}));
  REQUIRE(sent.size() == 1);
  CHECK(sent[0].at("t") == Value::integer(0));

  // query over an empty history
  CHECK(rt.find(rs[0])
            ->query_history(HistoryKind::Sent,
                            Pattern::tuple({Pattern::constant(Value::atom("nope"))}))
            .empty());

  // peer pattern on sent entries matches any member of the target set
  auto sent_to = p->query_history(HistoryKind::Sent,
                                  Pattern::tuple({Pattern::constant(Value::atom("question")),
                                                  Pattern::wildcard(), Pattern::wildcard()}),
                                  Pattern::constant(Value::pid(rs[1])));
  CHECK(sent_to.size() == 1);
}

TEST_CASE("deterministic replay: same seed, same histories and clocks") {
  auto run_once = [](std::uint64_t seed) {
    Runtime rt(det_cfg(seed));
    auto echo = scripted_def("B", [](Scripted& p) {
      Scripted* self = &p;
      p.on_receive(Pattern::tuple({Pattern::constant(Value::atom("m")), Pattern::free("n")}),
                   [self](const Env& env, const Delivery& d) {
                     self->send(Value::tuple({Value::atom("ack"), env.at("n")}), d.sender);
                   });
      p.body = [](Scripted& s) { await_received(s, 4); };
    });
    auto rs = rt.spawn(echo, {}, 3);
    auto a = rt.spawn(scripted_def("A",
                                   [&](Scripted& p) {
                                     auto to = rs;
                                     p.body = [to](Scripted& self) {
                                       for (int i = 0; i < 4; ++i) self.send(msg(i), to);
                                       await_received(self, 12);
                                     };
                                   }),
                      {});
    rt.start(rs);
    rt.start(a);
    rt.run_until({});
    std::string fingerprint;
    for (const auto& pid : rt.pids()) {
      Process* p = rt.find(pid);
      fingerprint += pid.str() + ":";
      for (const auto& e : p->received_history()) {
        fingerprint += encode(e.payload) + "<" + e.peers[0].str() + ">";
        if (e.logical_time) fingerprint += std::to_string(*e.logical_time);
        fingerprint += ";";
      }
      fingerprint += "|";
    }
    return fingerprint;
  };
  CHECK(run_once(7) == run_once(7));
  CHECK(run_once(8) == run_once(8));
}

TEST_CASE("per-process clock monotonicity on scripted runs") {
  Runtime rt(det_cfg(11));
  auto echo = scripted_def("B", [](Scripted& p) {
    Scripted* self = &p;
    p.on_receive(Pattern::wildcard(), [self](const Env&, const Delivery& d) {
      self->send(Value::atom("ack"), d.sender);
    });
    p.body = [](Scripted& s) { await_received(s, 2); };
  });
  auto rs = rt.spawn(echo, {}, 4);
  auto a = rt.spawn(scripted_def("A",
                                 [&](Scripted& p) {
                                   auto to = rs;
                                   p.body = [to](Scripted& self) {
                                     self.send(msg(1), to);
                                     self.send(msg(2), to);
                                     await_received(self, 8);
                                   };
                                 }),
                    {});
  rt.start(rs);
  rt.start(a);
  rt.run_until({});
  for (const auto& pid : rt.pids()) {
    std::uint64_t prev = 0;
    for (const auto& ev : rt.find(pid)->clock_trace()) {
      CHECK(ev.clock_after > prev);
      if (ev.kind == ClockEvent::Kind::Recv) {
        REQUIRE(ev.msg_stamp.has_value());
        CHECK(*ev.msg_stamp < ev.clock_after);  // causality
      }
      prev = ev.clock_after;
    }
  }
}

TEST_CASE("concurrent mode: await timeout fires in real time") {
  RuntimeConfig cfg;
  cfg.mode = ExecMode::Concurrent;
  Runtime rt(cfg);
  std::atomic<bool> fired{false};
  auto pid = rt.spawn(scripted_def("P",
                                   [&](Scripted& p) {
                                     p.body = [&fired](Scripted& self) {
                                       self.await({{[] { return false; }, {}}}, 0.01,
                                                  [&fired] { fired = true; });
                                     };
                                   }),
                      {});
  rt.start(pid);
  bool done = rt.wait_until([&] { return fired.load(); }, secs_to_nanos(5.0));
  CHECK(done);
  rt.shutdown();
  CHECK(fired);
}

TEST_CASE("concurrent mode: messages flow between threads") {
  RuntimeConfig cfg;
  cfg.mode = ExecMode::Concurrent;
  Runtime rt(cfg);
  std::atomic<int> acks{0};
  auto echo = scripted_def("B", [](Scripted& p) {
    Scripted* self = &p;
    p.on_receive(Pattern::wildcard(), [self](const Env&, const Delivery& d) {
      self->send(Value::atom("ack"), d.sender);
    });
    p.body = [](Scripted& s) { await_received(s, 1); };
  });
  auto rs = rt.spawn(echo, {}, 3);
  auto a = rt.spawn(
      scripted_def("A",
                   [&](Scripted& p) {
                     auto to = rs;
                     p.body = [to, &acks](Scripted& self) {
                       self.send(Value::atom("hello"), to);
                       self.await({{[&self] { return self.received_history().size() >= 3; },
                                    [&acks, &self] {
                                      acks = static_cast<int>(self.received_history().size());
                                    }}},
                                  5.0, {});
                     };
                   }),
      {});
  rt.start(rs);
  rt.start(a);
  bool done = rt.wait_until([&] { return acks.load() >= 3; }, secs_to_nanos(10.0));
  CHECK(done);
  rt.shutdown();
  CHECK(acks.load() == 3);
}
