#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "distcheck/base.hpp"
#include "distcheck/pattern.hpp"
#include "distcheck/pid.hpp"
#include "distcheck/value.hpp"

namespace distcheck {

class Runtime;
class Process;

enum class ExecMode { Deterministic, Concurrent };
enum class ChannelOrder { Fifo, Arbitrary };

struct RuntimeConfig {
  ExecMode mode = ExecMode::Deterministic;
  bool logical_clocks = true;
  ChannelOrder channel_order = ChannelOrder::Fifo;
  std::uint64_t seed = 1;
};

/// One enqueued delivery attempt. `internal` marks runtime traffic
/// (observation envelopes, timer and control messages) that never touches
/// logical clocks and is exempt from fault injection and channel shuffling.
struct Delivery {
  Value payload;
  ProcessId sender;
  std::optional<std::uint64_t> stamp;
  Nanos enqueue_time = 0;
  bool internal = false;
};

/// One entry of a process's append-only `sent` or `received` history.
/// peers: the full target set for a send, the single sender for a receive.
/// logical_time: the send stamp, or the receiver's clock after processing.
struct HistoryEntry {
  Value payload;
  std::vector<ProcessId> peers;  // sorted
  std::optional<std::uint64_t> logical_time;
};

enum class HistoryKind { Sent, Received };

/// Per-process record of every clock update, kept for causality checks.
struct ClockEvent {
  enum class Kind { Send, Recv };
  Kind kind;
  std::optional<std::uint64_t> msg_stamp;  // stamp carried by the message (Recv)
  std::uint64_t clock_after;
};

struct AwaitBranch {
  std::function<bool()> pred;
  std::function<void()> then;
};

/// Fault layers sit between send statements and target mailboxes. `put`
/// enqueues one copy of a payload to the pending (message, target) pair
/// after a delay; a layer may call it zero or more times, now or later.
class TransportLayer {
 public:
  virtual ~TransportLayer() = default;
  using Put = std::function<void(const Value& payload, Nanos delay)>;
  virtual void on_send(const std::string& sender_kind, const Value& payload,
                       const ProcessId& target, const Put& put) = 0;
  /// Releases any held-back messages, in original per-target order.
  virtual void flush() {}
  virtual bool has_held() const { return false; }
};

/// Factory plus metadata for a process kind.
struct ProcessDef {
  std::string kind;
  std::function<std::unique_ptr<Process>()> make;
  bool is_checker = false;    // checkers are never instrumented and are
                              // scheduled out-of-band in deterministic mode
  bool instrumented = false;
};

/// Base class for processes. A process runs `run()` once at start; awaiting
/// is continuation-style: `await` registers predicates and returns, and the
/// runtime re-evaluates them after each yield-point batch of deliveries or
/// when the timeout expires. The process terminates when the run chain
/// completes with no pending await.
class Process {
 public:
  static constexpr int kTimeoutBranch = -2;

  virtual ~Process() = default;

  const ProcessId& id() const { return id_; }
  const std::string& kind() const { return id_.kind; }

  const std::vector<HistoryEntry>& sent_history() const { return sent_; }
  const std::vector<HistoryEntry>& received_history() const { return received_; }
  const std::vector<ClockEvent>& clock_trace() const { return clock_trace_; }

  /// Current Lamport clock value; throws if clocks are disabled.
  std::uint64_t logical_clock() const;

  /// Scans a history: one Env per matching entry. For sent entries the peer
  /// pattern matches if it matches any member of the target set (first
  /// member in id order wins a fresh binding). A time pattern never matches
  /// an entry without a logical time.
  std::vector<Env> query_history(HistoryKind which, const Pattern& payload,
                                 const std::optional<Pattern>& peer = {},
                                 const std::optional<Pattern>& time = {},
                                 const Env& env = {}) const;

  /// Index of the branch fired by the most recently completed await
  /// (kTimeoutBranch for a timeout), or -1 if none completed yet.
  int last_await_branch() const { return last_branch_; }
  bool done() const { return done_; }
  bool faulted() const { return faulted_; }

  // -- instrumentation support (installed by observe.cpp, not user code) --
  using SendHook = std::function<void(Process&, const Value& payload,
                                      const std::vector<ProcessId>& targets,
                                      std::optional<std::uint64_t> stamp)>;
  using RecvHook = std::function<void(Process&, const Delivery&, const HistoryEntry&)>;
  void set_send_hook(SendHook h) { send_hook_ = std::move(h); }
  void set_recv_hook(RecvHook h) { recv_hook_ = std::move(h); }
  bool has_hooks() const { return send_hook_ || recv_hook_; }

  /// Out-of-band send: no clock tick, no history entry, bypasses the fault
  /// layer, never re-observed. Used for observation envelopes.
  void send_internal(const ProcessId& to, const Value& payload);

 protected:
  virtual void setup(const std::vector<Value>& args) { (void)args; }
  virtual void run() {}

  using Handler = std::function<void(const Env&, const Delivery&)>;
  /// Registers a receive clause; clauses are tried in declaration order
  /// against each delivery and every matching clause runs.
  void on_receive(Pattern payload, Handler handler);
  void on_receive(Pattern payload, Pattern sender, Handler handler);

  void send(const Value& payload, const ProcessId& to);
  void send(const Value& payload, const std::vector<ProcessId>& to);

  /// Registers the pending await. First true predicate wins (declaration
  /// order breaks ties); on_timeout fires if the budget elapses first.
  /// Throws if there is nothing to wait for (no branches, no timeout).
  void await(std::vector<AwaitBranch> branches,
             std::optional<double> timeout_secs = std::nullopt,
             std::function<void()> on_timeout = {});

  /// Emits one transcript line attributed to this process.
  void output(const std::string& line);

  Runtime& runtime() const { return *rt_; }
  Nanos now() const;

 private:
  friend class Runtime;

  struct Clause {
    Pattern payload;
    std::optional<Pattern> sender;
    Handler handler;
  };
  struct Pending {
    std::vector<AwaitBranch> branches;
    std::optional<Nanos> deadline;
    std::function<void()> on_timeout;
  };

  void step();
  void deliver_one(const Delivery& d);
  bool protect(const std::function<void()>& f);
  bool terminal() const { return done_ || faulted_; }
  bool has_mail();
  std::deque<Delivery> take_mail();
  std::optional<Nanos> pending_deadline() const;
  bool runnable(Nanos vnow);

  Runtime* rt_ = nullptr;
  ProcessId id_;
  bool is_checker_ = false;
  bool started_ = false;
  bool ran_ = false;
  bool done_ = false;
  bool faulted_ = false;
  bool in_step_ = false;
  int last_branch_ = -1;

  std::uint64_t clock_ = 0;
  std::vector<HistoryEntry> sent_;
  std::vector<HistoryEntry> received_;
  std::vector<ClockEvent> clock_trace_;
  std::vector<Clause> clauses_;
  std::optional<Pending> pending_;

  SendHook send_hook_;
  RecvHook recv_hook_;

  // mailbox; guarded by mb_mu_ in concurrent mode
  std::mutex mb_mu_;
  std::condition_variable mb_cv_;
  std::deque<Delivery> mb_q_;
  Nanos mb_last_enqueue_ = 0;
  std::thread thread_;
};

/// The process runtime. Two execution modes with one semantics contract:
/// deterministic (seeded single-threaded scheduler over virtual time) and
/// concurrent (one thread per process, real time). The checker kind is
/// serviced out-of-band in deterministic mode so that instrumentation never
/// perturbs the algorithm's schedule.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig cfg);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const { return cfg_; }

  /// Creates and sets up `count` processes; they do not run until start().
  std::vector<ProcessId> spawn(const ProcessDef& def, std::vector<Value> args,
                               int count = 1);
  void start(const std::vector<ProcessId>& pids);

  enum class RunStatus { Stopped, Quiescent };
  /// Deterministic mode: drives the scheduler until stop() holds or no
  /// event (delivery, timer, held message) can ever fire again.
  RunStatus run_until(const std::function<bool()>& stop);
  /// Concurrent mode: blocks until stop() holds or the wall cap elapses.
  bool wait_until(const std::function<bool()>& stop, Nanos wall_cap);
  /// Wakes wait_until(); call after externally observable completion.
  void poke();

  /// Stops all execution contexts and joins them. Idempotent.
  void shutdown();

  /// Monotonic checker-local time: virtual in deterministic mode.
  Nanos now() const;

  /// Schedules delivery of ('timer', name, started_ns) to `target` after
  /// `delay`; the message is internal (fault-exempt, unstamped).
  void schedule_timer(const ProcessId& target, const std::string& name, Nanos delay);

  /// Injects an internal control message (e.g. ('finalize')) into a mailbox.
  void inject(const ProcessId& target, const Value& payload);

  void set_transport_layer(std::shared_ptr<TransportLayer> layer);

  Process* find(const ProcessId& pid);
  std::vector<ProcessId> pids() const;

  void set_output_sink(std::function<void(const ProcessId&, const std::string&)> sink);

  struct Stats {
    int undeliverable = 0;
    std::vector<std::pair<ProcessId, std::string>> process_faults;
  };
  Stats stats() const;

 private:
  friend class Process;

  void transmit(Process& sender, const Value& payload,
                const std::vector<ProcessId>& targets,
                std::optional<std::uint64_t> stamp);
  void enqueue(const ProcessId& target, Delivery d, Nanos delay);
  void enqueue_now(const ProcessId& target, Delivery d);
  void on_process_done(Process& p);
  void record_fault(const ProcessId& pid, const std::string& what);
  void emit_output(const ProcessId& pid, const std::string& line);
  bool pop_due_events();
  std::optional<Nanos> next_deadline() const;
  void thread_main(Process& p);

  RuntimeConfig cfg_;
  mutable std::mutex procs_mu_;
  std::vector<std::unique_ptr<Process>> procs_;
  std::uint32_t next_seq_ = 0xa001;

  std::shared_ptr<TransportLayer> layer_;

  // deterministic scheduler state
  Nanos vnow_ = 0;
  struct TimedEvent {
    Nanos due;
    std::uint64_t order;
    ProcessId target;
    Delivery d;
  };
  std::vector<TimedEvent> timed_;  // min-heap by (due, order)
  std::uint64_t timed_order_ = 0;
  mutable std::mutex timed_mu_;
  SplitMix64 sched_rng_;
  SplitMix64 channel_rng_;
  mutable std::mutex channel_mu_;

  // concurrent mode state
  std::chrono::steady_clock::time_point epoch_;
  struct TimerService;
  std::unique_ptr<TimerService> timers_;

  std::atomic<bool> stopping_{false};
  bool shut_ = false;
  std::mutex done_mu_;
  std::condition_variable done_cv_;

  mutable std::mutex stats_mu_;
  Stats stats_;

  std::mutex out_mu_;
  std::function<void(const ProcessId&, const std::string&)> output_sink_;
};

}  // namespace distcheck
