#include "distcheck/runtime.hpp"

#include <algorithm>
#include <chrono>

namespace distcheck {

namespace {

struct TimedCmp {
  template <typename T>
  bool operator()(const T& a, const T& b) const {
    if (a.due != b.due) return a.due > b.due;
    return a.order > b.order;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Process

std::uint64_t Process::logical_clock() const {
  if (!rt_->config().logical_clocks) throw Error("logical clocks are disabled");
  return clock_;
}

std::vector<Env> Process::query_history(HistoryKind which, const Pattern& payload,
                                        const std::optional<Pattern>& peer,
                                        const std::optional<Pattern>& time,
                                        const Env& env) const {
  const auto& hist = which == HistoryKind::Sent ? sent_ : received_;
  std::vector<Env> out;
  for (const auto& e : hist) {
    auto m = payload.match(e.payload, env);
    if (!m) continue;
    if (peer) {
      std::optional<Env> pm;
      for (const auto& pr : e.peers) {
        pm = peer->match(Value::pid(pr), *m);
        if (pm) break;
      }
      if (!pm) continue;
      m = std::move(pm);
    }
    if (time) {
      if (!e.logical_time) continue;
      auto tm = time->match(Value::integer(static_cast<std::int64_t>(*e.logical_time)), *m);
      if (!tm) continue;
      m = std::move(tm);
    }
    out.push_back(std::move(*m));
  }
  return out;
}

void Process::on_receive(Pattern payload, Handler handler) {
  clauses_.push_back({std::move(payload), std::nullopt, std::move(handler)});
}

void Process::on_receive(Pattern payload, Pattern sender, Handler handler) {
  clauses_.push_back({std::move(payload), std::move(sender), std::move(handler)});
}

void Process::send(const Value& payload, const ProcessId& to) {
  send(payload, std::vector<ProcessId>{to});
}

void Process::send(const Value& payload, const std::vector<ProcessId>& to) {
  if (!started_) throw Error("send: process not running");
  std::vector<ProcessId> targets = to;
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  std::optional<std::uint64_t> stamp;
  if (rt_->config().logical_clocks) {
    clock_ += 1;  // one tick per send statement, not per target
    stamp = clock_;
    clock_trace_.push_back({ClockEvent::Kind::Send, stamp, clock_});
  }
  sent_.push_back({payload, targets, stamp});
  if (send_hook_) send_hook_(*this, payload, targets, stamp);
  rt_->transmit(*this, payload, targets, stamp);
}

void Process::send_internal(const ProcessId& to, const Value& payload) {
  rt_->enqueue_now(to, Delivery{payload, id_, std::nullopt, 0, true});
}

void Process::await(std::vector<AwaitBranch> branches, std::optional<double> timeout_secs,
                    std::function<void()> on_timeout) {
  if (branches.empty() && !timeout_secs)
    throw Error("await would block forever: no conditions and no timeout");
  if (timeout_secs && !(*timeout_secs > 0)) throw Error("await timeout must be positive");
  Pending p;
  p.branches = std::move(branches);
  if (timeout_secs) p.deadline = now() + secs_to_nanos(*timeout_secs);
  p.on_timeout = std::move(on_timeout);
  pending_ = std::move(p);
}

void Process::output(const std::string& line) { rt_->emit_output(id_, line); }

Nanos Process::now() const { return rt_->now(); }

bool Process::has_mail() {
  std::lock_guard<std::mutex> lk(mb_mu_);
  return !mb_q_.empty();
}

std::deque<Delivery> Process::take_mail() {
  std::lock_guard<std::mutex> lk(mb_mu_);
  std::deque<Delivery> out;
  out.swap(mb_q_);
  return out;
}

std::optional<Nanos> Process::pending_deadline() const {
  return pending_ ? pending_->deadline : std::nullopt;
}

bool Process::runnable(Nanos vnow) {
  if (!started_ || terminal()) return false;
  if (!ran_) return true;
  if (has_mail()) return true;
  if (pending_ && pending_->deadline && vnow >= *pending_->deadline) return true;
  return false;
}

bool Process::protect(const std::function<void()>& f) {
  try {
    f();
    return true;
  } catch (const std::exception& e) {
    faulted_ = true;
    rt_->record_fault(id_, e.what());
    rt_->on_process_done(*this);
    return false;
  } catch (...) {
    faulted_ = true;
    rt_->record_fault(id_, "unknown error");
    rt_->on_process_done(*this);
    return false;
  }
}

void Process::deliver_one(const Delivery& d) {
  bool clocked = rt_->config().logical_clocks && d.stamp && !d.internal;
  if (clocked) {
    clock_ = std::max(clock_, *d.stamp) + 1;
    clock_trace_.push_back({ClockEvent::Kind::Recv, d.stamp, clock_});
  }
  received_.push_back(
      {d.payload, {d.sender}, clocked ? std::optional<std::uint64_t>(clock_) : std::nullopt});
  const HistoryEntry entry = received_.back();  // copy: handlers may append
  if (recv_hook_ && !d.internal) recv_hook_(*this, d, entry);
  const std::size_t n = clauses_.size();  // clauses added by handlers apply to later messages
  for (std::size_t i = 0; i < n; ++i) {
    auto m = clauses_[i].payload.match(d.payload, Env{});
    if (!m) continue;
    if (clauses_[i].sender) {
      m = clauses_[i].sender->match(Value::pid(d.sender), *m);
      if (!m) continue;
    }
    if (clauses_[i].handler) clauses_[i].handler(*m, d);
  }
}

void Process::step() {
  if (terminal() || in_step_) return;
  in_step_ = true;
  struct Reset {
    bool& f;
    ~Reset() { f = false; }
  } reset{in_step_};

  if (!ran_) {
    ran_ = true;
    if (!protect([&] { run(); })) return;
  }
  for (;;) {
    if (terminal()) return;
    std::deque<Delivery> batch = take_mail();
    for (auto& d : batch) {
      if (!protect([&] { deliver_one(d); })) return;
    }
    if (pending_) {
      int fired = -1;
      for (std::size_t i = 0; i < pending_->branches.size() && fired < 0; ++i) {
        bool hit = false;
        if (!protect([&] {
              hit = pending_->branches[i].pred && pending_->branches[i].pred();
            }))
          return;
        if (hit) fired = static_cast<int>(i);
      }
      if (fired >= 0) {
        AwaitBranch br = std::move(pending_->branches[static_cast<std::size_t>(fired)]);
        pending_.reset();
        last_branch_ = fired;
        if (!protect([&] {
              if (br.then) br.then();
            }))
          return;
        continue;
      }
      if (pending_->deadline && now() >= *pending_->deadline) {
        auto on_timeout = std::move(pending_->on_timeout);
        pending_.reset();
        last_branch_ = kTimeoutBranch;
        if (!protect([&] {
              if (on_timeout) on_timeout();
            }))
          return;
        continue;
      }
      if (has_mail()) continue;
      return;  // still awaiting
    }
    // run chain complete: the process terminates
    done_ = true;
    rt_->on_process_done(*this);
    return;
  }
}

// ---------------------------------------------------------------------------
// TimerService (concurrent mode)

struct Runtime::TimerService {
  using Clock = std::chrono::steady_clock;
  struct Item {
    Clock::time_point due;
    std::uint64_t order;
    std::function<void()> fn;
  };

  std::mutex mu;
  std::condition_variable cv;
  std::vector<Item> heap;
  std::uint64_t next_order = 0;
  bool stop = false;
  std::thread th;

  struct Cmp {
    bool operator()(const Item& a, const Item& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.order > b.order;
    }
  };

  void start() {
    th = std::thread([this] { loop(); });
  }

  void schedule(Clock::time_point due, std::function<void()> fn) {
    {
      std::lock_guard<std::mutex> lk(mu);
      heap.push_back({due, next_order++, std::move(fn)});
      std::push_heap(heap.begin(), heap.end(), Cmp{});
    }
    cv.notify_all();
  }

  void loop() {
    std::unique_lock<std::mutex> lk(mu);
    while (!stop) {
      if (heap.empty()) {
        cv.wait(lk);
        continue;
      }
      auto due = heap.front().due;
      if (Clock::now() >= due) {
        std::pop_heap(heap.begin(), heap.end(), Cmp{});
        Item item = std::move(heap.back());
        heap.pop_back();
        lk.unlock();
        item.fn();
        lk.lock();
        continue;
      }
      cv.wait_until(lk, due);
    }
  }

  void stop_join() {
    {
      std::lock_guard<std::mutex> lk(mu);
      stop = true;
    }
    cv.notify_all();
    if (th.joinable()) th.join();
  }
};

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(RuntimeConfig cfg)
    : cfg_(cfg),
      sched_rng_(SplitMix64::mix(cfg.seed ^ 0x5c4d3e2f1a0b9c8dULL)),
      channel_rng_(SplitMix64::mix(cfg.seed ^ 0x1f2e3d4c5b6a7988ULL)),
      epoch_(std::chrono::steady_clock::now()) {
  if (cfg_.mode == ExecMode::Concurrent) {
    timers_ = std::make_unique<TimerService>();
    timers_->start();
  }
}

Runtime::~Runtime() { shutdown(); }

std::vector<ProcessId> Runtime::spawn(const ProcessDef& def, std::vector<Value> args,
                                      int count) {
  if (count < 1) throw Error("spawn: count must be at least 1");
  if (def.kind.empty()) throw Error("spawn: process definition needs a kind");
  if (!def.make) throw Error("spawn: process definition has no factory");
  std::vector<ProcessId> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::unique_ptr<Process> p = def.make();
    if (!p) throw Error("spawn: factory returned null");
    p->rt_ = this;
    p->is_checker_ = def.is_checker;
    {
      std::lock_guard<std::mutex> lk(procs_mu_);
      p->id_ = ProcessId{def.kind, next_seq_++};
    }
    p->setup(args);
    out.push_back(p->id_);
    {
      std::lock_guard<std::mutex> lk(procs_mu_);
      procs_.push_back(std::move(p));
    }
  }
  return out;
}

void Runtime::start(const std::vector<ProcessId>& pids) {
  for (const auto& pid : pids) {
    Process* p = find(pid);
    if (!p) throw Error("start: unknown process " + pid.str());
    if (p->started_) throw Error("start: process already started: " + pid.str());
    p->started_ = true;
    if (cfg_.mode == ExecMode::Concurrent)
      p->thread_ = std::thread(&Runtime::thread_main, this, std::ref(*p));
  }
}

Runtime::RunStatus Runtime::run_until(const std::function<bool()>& stop) {
  if (cfg_.mode != ExecMode::Deterministic)
    throw Error("run_until is only available in deterministic mode");
  for (;;) {
    // Checkers are serviced out-of-band: they never participate in the
    // seeded schedule, so observing a run cannot perturb it.
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (std::size_t i = 0; i < procs_.size(); ++i) {
        Process& p = *procs_[i];
        if (p.is_checker_ && p.runnable(vnow_)) {
          p.step();
          progressed = true;
        }
      }
    }
    if (stop && stop()) return RunStatus::Stopped;
    std::vector<Process*> cands;
    for (std::size_t i = 0; i < procs_.size(); ++i) {
      Process& p = *procs_[i];
      if (!p.is_checker_ && p.runnable(vnow_)) cands.push_back(&p);
    }
    if (cands.empty()) {
      if (pop_due_events()) continue;
      if (layer_ && layer_->has_held()) {
        layer_->flush();
        continue;
      }
      if (auto nd = next_deadline()) {
        vnow_ = std::max(vnow_, *nd);
        pop_due_events();
        continue;
      }
      return RunStatus::Quiescent;
    }
    Process* pick = cands[sched_rng_.below(cands.size())];
    pick->step();
  }
}

bool Runtime::wait_until(const std::function<bool()>& stop, Nanos wall_cap) {
  std::unique_lock<std::mutex> lk(done_mu_);
  auto tp = std::chrono::steady_clock::now() + std::chrono::nanoseconds(wall_cap);
  return done_cv_.wait_until(lk, tp, [&] { return stop(); });
}

void Runtime::poke() { done_cv_.notify_all(); }

void Runtime::shutdown() {
  if (shut_) return;
  shut_ = true;
  stopping_ = true;
  if (timers_) timers_->stop_join();
  std::vector<Process*> ps;
  {
    std::lock_guard<std::mutex> lk(procs_mu_);
    for (auto& up : procs_) ps.push_back(up.get());
  }
  for (Process* p : ps) p->mb_cv_.notify_all();
  for (Process* p : ps)
    if (p->thread_.joinable()) p->thread_.join();
}

Nanos Runtime::now() const {
  if (cfg_.mode == ExecMode::Deterministic) return vnow_;
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now() - epoch_)
      .count();
}

void Runtime::schedule_timer(const ProcessId& target, const std::string& name, Nanos delay) {
  Value msg = Value::tuple(
      {Value::atom("timer"), Value::text(name), Value::integer(now())});
  enqueue(target, Delivery{msg, target, std::nullopt, 0, true}, std::max<Nanos>(delay, 0));
}

void Runtime::inject(const ProcessId& target, const Value& payload) {
  enqueue_now(target, Delivery{payload, target, std::nullopt, 0, true});
}

void Runtime::set_transport_layer(std::shared_ptr<TransportLayer> layer) {
  layer_ = std::move(layer);
}

Process* Runtime::find(const ProcessId& pid) {
  std::lock_guard<std::mutex> lk(procs_mu_);
  if (pid.seq < 0xa001) return nullptr;
  std::size_t idx = pid.seq - 0xa001;
  if (idx >= procs_.size()) return nullptr;
  Process* p = procs_[idx].get();
  return p->id_ == pid ? p : nullptr;
}

std::vector<ProcessId> Runtime::pids() const {
  std::lock_guard<std::mutex> lk(procs_mu_);
  std::vector<ProcessId> out;
  out.reserve(procs_.size());
  for (const auto& up : procs_) out.push_back(up->id_);
  return out;
}

void Runtime::set_output_sink(std::function<void(const ProcessId&, const std::string&)> sink) {
  std::lock_guard<std::mutex> lk(out_mu_);
  output_sink_ = std::move(sink);
}

Runtime::Stats Runtime::stats() const {
  std::lock_guard<std::mutex> lk(stats_mu_);
  return stats_;
}

void Runtime::transmit(Process& sender, const Value& payload,
                       const std::vector<ProcessId>& targets,
                       std::optional<std::uint64_t> stamp) {
  const ProcessId from = sender.id_;
  for (const auto& target : targets) {
    if (layer_) {
      ProcessId to = target;
      auto put = [this, from, stamp, to](const Value& pl, Nanos delay) {
        enqueue(to, Delivery{pl, from, stamp, 0, false}, delay);
      };
      layer_->on_send(sender.kind(), payload, target, put);
    } else {
      enqueue(target, Delivery{payload, from, stamp, 0, false}, 0);
    }
  }
}

void Runtime::enqueue(const ProcessId& target, Delivery d, Nanos delay) {
  if (delay <= 0) {
    enqueue_now(target, std::move(d));
    return;
  }
  if (cfg_.mode == ExecMode::Deterministic) {
    std::lock_guard<std::mutex> lk(timed_mu_);
    timed_.push_back({now() + delay, timed_order_++, target, std::move(d)});
    std::push_heap(timed_.begin(), timed_.end(), TimedCmp{});
  } else {
    auto due = std::chrono::steady_clock::now() + std::chrono::nanoseconds(delay);
    ProcessId to = target;
    timers_->schedule(due, [this, to, d = std::move(d)]() mutable {
      enqueue_now(to, std::move(d));
    });
  }
}

void Runtime::enqueue_now(const ProcessId& target, Delivery d) {
  Process* p = find(target);
  if (!p) {
    std::lock_guard<std::mutex> lk(stats_mu_);
    stats_.undeliverable += 1;
    return;
  }
  {
    std::lock_guard<std::mutex> lk(p->mb_mu_);
    p->mb_last_enqueue_ = std::max(p->mb_last_enqueue_ + 1, now());
    d.enqueue_time = p->mb_last_enqueue_;
    // Checker-bound and internal traffic always arrives in FIFO order, so
    // the observation log's receipt stamps track its processing order.
    bool shuffle = cfg_.channel_order == ChannelOrder::Arbitrary && !d.internal &&
                   !p->is_checker_ && !p->mb_q_.empty();
    if (shuffle) {
      std::size_t pos;
      {
        std::lock_guard<std::mutex> rl(channel_mu_);
        pos = channel_rng_.below(p->mb_q_.size() + 1);
      }
      p->mb_q_.insert(p->mb_q_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(d));
    } else {
      p->mb_q_.push_back(std::move(d));
    }
  }
  p->mb_cv_.notify_all();
}

void Runtime::on_process_done(Process&) { poke(); }

void Runtime::record_fault(const ProcessId& pid, const std::string& what) {
  std::lock_guard<std::mutex> lk(stats_mu_);
  stats_.process_faults.emplace_back(pid, what);
}

void Runtime::emit_output(const ProcessId& pid, const std::string& line) {
  std::lock_guard<std::mutex> lk(out_mu_);
  if (output_sink_) output_sink_(pid, line);
}

bool Runtime::pop_due_events() {
  std::vector<TimedEvent> due;
  {
    std::lock_guard<std::mutex> lk(timed_mu_);
    while (!timed_.empty() && timed_.front().due <= vnow_) {
      std::pop_heap(timed_.begin(), timed_.end(), TimedCmp{});
      due.push_back(std::move(timed_.back()));
      timed_.pop_back();
    }
  }
  for (auto& e : due) enqueue_now(e.target, std::move(e.d));
  return !due.empty();
}

std::optional<Nanos> Runtime::next_deadline() const {
  std::optional<Nanos> best;
  auto consider = [&](Nanos t) {
    if (!best || t < *best) best = t;
  };
  {
    std::lock_guard<std::mutex> lk(timed_mu_);
    if (!timed_.empty()) consider(timed_.front().due);
  }
  {
    std::lock_guard<std::mutex> lk(procs_mu_);
    for (const auto& up : procs_) {
      const Process& p = *up;
      if (p.started_ && !p.done_ && !p.faulted_ && p.pending_ && p.pending_->deadline)
        consider(*p.pending_->deadline);
    }
  }
  return best;
}

void Runtime::thread_main(Process& p) {
  p.step();
  for (;;) {
    std::unique_lock<std::mutex> lk(p.mb_mu_);
    if (stopping_ || p.terminal()) break;
    auto deadline = p.pending_deadline();
    auto wake = [&] { return stopping_.load() || !p.mb_q_.empty(); };
    if (deadline) {
      auto tp = epoch_ + std::chrono::nanoseconds(*deadline);
      p.mb_cv_.wait_until(lk, tp, wake);
    } else {
      p.mb_cv_.wait(lk, wake);
    }
    if (stopping_) break;
    lk.unlock();
    p.step();
  }
}

}  // namespace distcheck
