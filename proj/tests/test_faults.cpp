#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "distcheck/faults.hpp"
#include "distcheck/runtime.hpp"

using namespace distcheck;

namespace {

class Scripted : public Process {
 public:
  std::function<void(Scripted&)> body;
  using Process::await;
  using Process::on_receive;
  using Process::send;

 protected:
  void run() override {
    if (body) body(*this);
  }
};

ProcessDef scripted_def(const std::string& kind, std::function<void(Scripted&)> configure) {
  return ProcessDef{kind, [configure] {
                      auto p = std::make_unique<Scripted>();
                      if (configure) configure(*p);
                      return std::unique_ptr<Process>(std::move(p));
                    }};
}

Value msg(std::int64_t n) { return Value::tuple({Value::atom("m"), Value::integer(n)}); }

const ProcessId kTarget{"R", 0xa002};

}  // namespace

TEST_CASE("all-zero config is the identity fault layer") {
  SplitMix64 rng(1);
  FaultConfig cfg;
  for (int i = 0; i < 100; ++i) {
    auto actions = decide(cfg, msg(i), kTarget, rng);
    REQUIRE(actions.size() == 1);
    CHECK_FALSE(actions[0].dropped);
    CHECK(actions[0].delay == 0);
    CHECK(actions[0].times == 1);
    CHECK(*actions[0].payload == msg(i));
  }
}

TEST_CASE("forced duplication yields one extra copy in a single action") {
  SplitMix64 rng(1);
  FaultConfig cfg;
  cfg.dup_prob = 1.0;
  auto actions = decide(cfg, msg(1), kTarget, rng);
  REQUIRE(actions.size() == 1);
  CHECK(actions[0].times == 2);
  CHECK(actions[0].delay == 0);
}

TEST_CASE("forced loss drops") {
  SplitMix64 rng(1);
  FaultConfig cfg;
  cfg.loss_prob = 1.0;
  auto actions = decide(cfg, msg(1), kTarget, rng);
  REQUIRE(actions.size() == 1);
  CHECK(actions[0].dropped);
}

TEST_CASE("forced corruption rewrites the payload") {
  SplitMix64 rng(1);
  FaultConfig cfg;
  cfg.corrupt_name = "flip-outcome";
  cfg.corrupt_prob = 1.0;
  Value outcome = Value::tuple({Value::atom("outcome"), Value::integer(4)});
  auto actions = decide(cfg, outcome, kTarget, rng);
  REQUIRE(actions.size() == 1);
  CHECK(*actions[0].payload == Value::tuple({Value::atom("outcome"), Value::integer(5)}));
}

TEST_CASE("duplication with per-copy corruption can split into two actions") {
  FaultConfig cfg;
  cfg.dup_prob = 1.0;
  cfg.corrupt_name = "flip-outcome";
  cfg.corrupt_prob = 0.5;
  Value outcome = Value::tuple({Value::atom("outcome"), Value::integer(4)});
  bool saw_split = false;
  SplitMix64 rng(1);
  for (int i = 0; i < 200 && !saw_split; ++i) {
    auto actions = decide(cfg, outcome, kTarget, rng);
    int copies = 0;
    for (const auto& a : actions) copies += a.times;
    CHECK(copies == 2);
    if (actions.size() == 2) {
      saw_split = true;
      CHECK(*actions[0].payload != *actions[1].payload);
    }
  }
  CHECK(saw_split);
}

TEST_CASE("seed determinism: identical config and seed give identical decisions") {
  FaultConfig cfg;
  cfg.loss_prob = 0.3;
  cfg.dup_prob = 0.3;
  cfg.delay = DelaySpec::uniform(0.001, 0.01);
  auto render = [&](std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::string out;
    for (int i = 0; i < 200; ++i) {
      for (const auto& a : decide(cfg, msg(i), kTarget, rng)) {
        out += a.dropped ? "D" : "d" + std::to_string(a.delay) + "x" + std::to_string(a.times);
        out += ";";
      }
    }
    return out;
  };
  CHECK(render(42) == render(42));
  CHECK(render(42) != render(43));
}

TEST_CASE("drop and duplication rates stay inside 3-sigma binomial bands") {
  {
    FaultConfig cfg;
    cfg.loss_prob = 0.01;
    SplitMix64 rng(2024);
    int drops = 0;
    for (int i = 0; i < 10000; ++i)
      if (decide(cfg, msg(i), kTarget, rng)[0].dropped) ++drops;
    CHECK(drops >= 50);
    CHECK(drops <= 150);
  }
  {
    FaultConfig cfg;
    cfg.dup_prob = 0.05;
    SplitMix64 rng(2024);
    int extra = 0;
    for (int i = 0; i < 10000; ++i) {
      for (const auto& a : decide(cfg, msg(i), kTarget, rng)) extra += a.times - 1;
    }
    CHECK(extra >= 400);
    CHECK(extra <= 600);
  }
}

TEST_CASE("config validation catches out-of-range values") {
  FaultConfig cfg;
  cfg.loss_prob = 1.5;
  cfg.dup_prob = -0.1;
  cfg.reorder_holdback = -2;
  cfg.corrupt_name = "no-such-transformer";
  cfg.delay = DelaySpec::uniform(0.5, 0.1);
  auto problems = cfg.validate();
  CHECK(problems.size() == 5);
  CHECK_THROWS_AS(FaultLayer{cfg}, ConfigError);
}

TEST_CASE("holdback(1) inverts a two-message script") {
  RuntimeConfig rc;
  rc.seed = 5;
  Runtime rt(rc);
  std::vector<std::int64_t> order;
  auto recv = rt.spawn(scripted_def("B",
                                    [&](Scripted& p) {
                                      p.on_receive(
                                          Pattern::tuple({Pattern::constant(Value::atom("m")),
                                                          Pattern::free("n")}),
                                          [&order](const Env& env, const Delivery&) {
                                            order.push_back(env.at("n").as_int());
                                          });
                                      p.body = [](Scripted& self) {
                                        self.await({{[&self] {
                                                       return self.received_history().size() >= 2;
                                                     },
                                                     {}}},
                                                   10.0, {});
                                      };
                                    }),
                       {});
  auto sender = rt.spawn(scripted_def("A",
                                      [&](Scripted& p) {
                                        auto to = recv[0];
                                        p.body = [to](Scripted& self) {
                                          self.send(msg(1), to);  // A
                                          self.send(msg(2), to);  // B
                                        };
                                      }),
                         {});
  FaultConfig cfg;
  cfg.reorder_holdback = 1;
  auto layer = wrap(rt, cfg);
  rt.start(recv);
  rt.start(sender);
  rt.run_until({});
  CHECK(order == std::vector<std::int64_t>{2, 1});
  CHECK(layer->counters().held == 1);
  CHECK(layer->counters().released == 1);
}

TEST_CASE("holdback flushes the tail in original order at quiescence") {
  RuntimeConfig rc;
  Runtime rt(rc);
  std::vector<std::int64_t> order;
  auto recv = rt.spawn(scripted_def("B",
                                    [&](Scripted& p) {
                                      p.on_receive(
                                          Pattern::tuple({Pattern::constant(Value::atom("m")),
                                                          Pattern::free("n")}),
                                          [&order](const Env& env, const Delivery&) {
                                            order.push_back(env.at("n").as_int());
                                          });
                                      p.body = [](Scripted& self) {
                                        self.await({{[&self] {
                                                       return self.received_history().size() >= 3;
                                                     },
                                                     {}}},
                                                   10.0, {});
                                      };
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
  FaultConfig cfg;
  cfg.reorder_holdback = 1;
  wrap(rt, cfg);
  rt.start(recv);
  rt.start(sender);
  rt.run_until({});
  CHECK(order == std::vector<std::int64_t>{2, 1, 3});
}

TEST_CASE("identity layer does not change a deterministic run") {
  auto fingerprint = [](bool with_layer, std::uint64_t seed) {
    RuntimeConfig rc;
    rc.seed = seed;
    Runtime rt(rc);
    auto echo = scripted_def("B", [](Scripted& p) {
      Scripted* self = &p;
      p.on_receive(Pattern::wildcard(), [self](const Env&, const Delivery& d) {
        self->send(Value::atom("ack"), d.sender);
      });
      p.body = [](Scripted& s) {
        s.await({{[&s] { return !s.received_history().empty(); }, {}}}, 10.0, {});
      };
    });
    auto rs = rt.spawn(echo, {}, 3);
    auto a = rt.spawn(scripted_def("A",
                                   [&](Scripted& p) {
                                     auto to = rs;
                                     p.body = [to](Scripted& self) {
                                       self.send(msg(7), to);
                                       self.await({{[&self] {
                                                      return self.received_history().size() >= 3;
                                                    },
                                                    {}}},
                                                  10.0, {});
                                     };
                                   }),
                      {});
    if (with_layer) wrap(rt, FaultConfig{});
    rt.start(rs);
    rt.start(a);
    rt.run_until({});
    std::string out;
    for (const auto& pid : rt.pids()) {
      for (const auto& e : rt.find(pid)->received_history())
        out += pid.str() + encode(e.payload) + e.peers[0].str() +
               std::to_string(e.logical_time ? *e.logical_time : 0) + ";";
    }
    return out;
  };
  CHECK(fingerprint(true, 9) == fingerprint(false, 9));
  CHECK(fingerprint(true, 10) == fingerprint(false, 10));
}

TEST_CASE("scoped total loss is observably identical to a stopped process") {
  // every B message dropped vs B processes that never send
  auto observed_by_a = [](bool silent_pollees, bool use_loss) {
    RuntimeConfig rc;
    rc.seed = 3;
    Runtime rt(rc);
    auto echo = scripted_def("B", [silent_pollees](Scripted& p) {
      Scripted* self = &p;
      p.on_receive(Pattern::wildcard(), [self, silent_pollees](const Env&, const Delivery& d) {
        if (!silent_pollees) self->send(Value::atom("ack"), d.sender);
      });
      p.body = [](Scripted& s) {
        s.await({{[&s] { return !s.received_history().empty(); }, {}}}, 0.05, {});
      };
    });
    auto rs = rt.spawn(echo, {}, 3);
    auto a = rt.spawn(scripted_def("A",
                                   [&](Scripted& p) {
                                     auto to = rs;
                                     p.body = [to](Scripted& self) {
                                       self.send(msg(1), to);
                                       self.await({{[] { return false; }, {}}}, 0.1, {});
                                     };
                                   }),
                      {});
    if (use_loss) {
      FaultConfig cfg;
      cfg.loss_prob = 1.0;
      cfg.scope.sender_kinds = {"B"};
      wrap(rt, cfg);
    }
    rt.start(rs);
    rt.start(a);
    rt.run_until({});
    std::string out;
    for (const auto& e : rt.find(a[0])->received_history()) out += encode(e.payload) + ";";
    out += std::to_string(rt.find(a[0])->logical_clock());
    return out;
  };
  CHECK(observed_by_a(false, true) == observed_by_a(true, false));
}

TEST_CASE("scope by payload tag") {
  SplitMix64 rng(1);
  FaultLayer layer([] {
    FaultConfig cfg;
    cfg.loss_prob = 1.0;
    cfg.scope.payload_tags = {"question"};
    return cfg;
  }());
  std::vector<Value> delivered;
  auto put = [&](const Value& v, Nanos) { delivered.push_back(v); };
  Value q = Value::tuple({Value::atom("question"), Value::text("q?"), Value::integer(0)});
  Value r = Value::tuple({Value::atom("reply"), Value::atom("Y"), Value::integer(0)});
  layer.on_send("P", q, kTarget, put);
  layer.on_send("R", r, kTarget, put);
  REQUIRE(delivered.size() == 1);
  CHECK(delivered[0] == r);
  CHECK(layer.counters().dropped == 1);
}

TEST_CASE("configured delays do not block the sender") {
  RuntimeConfig rc;
  rc.mode = ExecMode::Concurrent;
  Runtime rt(rc);
  std::atomic<double> send_elapsed{-1.0};
  auto sink = rt.spawn(scripted_def("B",
                                    [](Scripted& p) {
                                      p.body = [](Scripted& s) {
                                        s.await({{[] { return false; }, {}}}, 2.0, {});
                                      };
                                    }),
                       {});
  auto a = rt.spawn(
      scripted_def("A",
                   [&](Scripted& p) {
                     auto to = sink[0];
                     p.body = [to, &send_elapsed](Scripted& self) {
                       auto t0 = std::chrono::steady_clock::now();
                       for (int i = 0; i < 10; ++i) self.send(msg(i), to);
                       send_elapsed =
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
                     };
                   }),
      {});
  FaultConfig cfg;
  cfg.delay = DelaySpec::fixed(0.2);
  wrap(rt, cfg);
  rt.start(sink);
  rt.start(a);
  rt.wait_until([&] { return send_elapsed.load() >= 0; }, secs_to_nanos(5.0));
  rt.shutdown();
  REQUIRE(send_elapsed.load() >= 0);
  CHECK(send_elapsed.load() < 0.1);  // ten 0.2s delays did not serialize into the send path
}
