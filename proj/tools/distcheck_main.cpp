// distcheck: run the checked polling workload or re-check an exported
// observation log.
//
// Exit codes: 0 all enabled checks passed, 1 some check failed or a
// deadline was violated, 2 invalid configuration, 3 internal error.

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "distcheck/polling.hpp"
#include "distcheck/replay.hpp"
#include "distcheck/scenario_io.hpp"

using namespace distcheck;

namespace {

int run_command(const std::string& config_path, PollingScenario overrides,
                const std::vector<std::string>& set_flags) {
  PollingScenario s;
  if (!config_path.empty()) s = load_scenario(config_path);
  // flags override the config file
  auto has = [&](const std::string& f) {
    for (const auto& x : set_flags)
      if (x == f) return true;
    return false;
  };
  if (has("pollees")) s.num_pollees = overrides.num_pollees;
  if (has("runs")) s.runs = overrides.runs;
  if (has("seed")) s.seed = overrides.seed;
  if (has("question")) s.question = overrides.question;
  if (has("mode")) s.mode = overrides.mode;
  if (has("order")) s.channel_order = overrides.channel_order;
  if (has("clocks")) s.logical_clocks = overrides.logical_clocks;
  if (has("s1")) s.checks.s1 = overrides.checks.s1;
  if (has("s2")) s.checks.s2 = overrides.checks.s2;
  if (has("strict")) s.checks.strict_unique_question = overrides.checks.strict_unique_question;
  if (has("loss")) s.faults.loss_prob = overrides.faults.loss_prob;
  if (has("dup")) s.faults.dup_prob = overrides.faults.dup_prob;
  if (has("delay")) s.faults.delay = overrides.faults.delay;
  if (has("reorder")) s.faults.reorder_holdback = overrides.faults.reorder_holdback;
  if (has("corrupt")) s.faults.corrupt_name = overrides.faults.corrupt_name;
  if (has("corrupt-prob")) s.faults.corrupt_prob = overrides.faults.corrupt_prob;
  if (has("fault-seed")) s.faults.seed = overrides.faults.seed;
  if (has("timeout-qr")) s.timeouts.q_r = overrides.timeouts.q_r;
  if (has("timeout-qo")) s.timeouts.q_o = overrides.timeouts.q_o;
  if (has("timeout-total")) s.timeouts.total = overrides.timeouts.total;
  if (has("export-log")) s.export_log = overrides.export_log;
  if (has("max-wall")) s.max_wall_secs = overrides.max_wall_secs;

  RunReport report = run_polling(s);
  print_report(std::cout, report);
  return report.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"message-passing runtime with a built-in safety/liveness checker"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "run the checked polling scenario");
  std::string config_path;
  PollingScenario o;
  std::string mode_str = "det", order_str = "fifo", delay_str;
  double qr = 0, qo = 0, total = 0;
  bool no_s1 = false, no_s2 = false, strict = false, no_clocks = false;

  run->add_option("--config", config_path, "JSON config file (flags override it)");
  run->add_option("--pollees", o.num_pollees, "number of pollee processes")->group("scenario");
  run->add_option("--runs", o.runs, "number of seeded runs");
  run->add_option("--seed", o.seed, "base seed; run i uses seed+i");
  run->add_option("--question", o.question, "question text");
  run->add_option("--mode", mode_str, "det|conc")->check(CLI::IsMember({"det", "conc"}));
  run->add_option("--order", order_str, "fifo|arbitrary")
      ->check(CLI::IsMember({"fifo", "arbitrary"}));
  run->add_flag("--no-clocks", no_clocks, "disable logical clocks");
  run->add_flag("--no-s1", no_s1, "disable the S1 check");
  run->add_flag("--no-s2", no_s2, "disable the S2 check");
  run->add_flag("--strict-question", strict, "require exactly one distinct question id");
  run->add_option("--loss", o.faults.loss_prob, "message loss probability");
  run->add_option("--dup", o.faults.dup_prob, "message duplication probability");
  run->add_option("--delay", delay_str, "delay spec: none|fixed:S|uniform:LO,HI");
  run->add_option("--reorder", o.faults.reorder_holdback, "holdback depth (0 = off)");
  run->add_option("--corrupt", o.faults.corrupt_name,
                  "corruption transformer (flip-outcome, blank-question)");
  run->add_option("--corrupt-prob", o.faults.corrupt_prob, "corruption probability");
  run->add_option("--fault-seed", o.faults.seed, "fault stream seed (mixed with run seed)");
  run->add_option("--timeout-qr", qr, "bound: question sent -> first reply (s)");
  run->add_option("--timeout-qo", qo, "bound: question sent -> all outcomes received (s)");
  run->add_option("--timeout-total", total, "bound on the whole execution (s)");
  run->add_option("--export-log", o.export_log, "write the observation log here");
  run->add_option("--max-wall", o.max_wall_secs, "concurrent-mode stall cap (s)");

  // --- replay ---
  auto* rep = app.add_subcommand("replay", "re-check an exported observation log");
  std::string log_path, checks_str = "s1,s2,liveness";
  rep->add_option("path", log_path, "observation log file")->required();
  rep->add_option("--checks", checks_str, "comma list of s1,s2,liveness");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::vector<std::string> set_flags;
      auto mark = [&](const char* opt, const char* name) {
        if (run->count(opt) > 0) set_flags.push_back(name);
      };
      mark("--pollees", "pollees");
      mark("--runs", "runs");
      mark("--seed", "seed");
      mark("--question", "question");
      mark("--mode", "mode");
      mark("--order", "order");
      mark("--no-clocks", "clocks");
      mark("--no-s1", "s1");
      mark("--no-s2", "s2");
      mark("--strict-question", "strict");
      mark("--loss", "loss");
      mark("--dup", "dup");
      mark("--delay", "delay");
      mark("--reorder", "reorder");
      mark("--corrupt", "corrupt");
      mark("--corrupt-prob", "corrupt-prob");
      mark("--fault-seed", "fault-seed");
      mark("--timeout-qr", "timeout-qr");
      mark("--timeout-qo", "timeout-qo");
      mark("--timeout-total", "timeout-total");
      mark("--export-log", "export-log");
      mark("--max-wall", "max-wall");
      o.mode = mode_str == "conc" ? ExecMode::Concurrent : ExecMode::Deterministic;
      o.channel_order =
          order_str == "arbitrary" ? ChannelOrder::Arbitrary : ChannelOrder::Fifo;
      o.logical_clocks = !no_clocks;
      o.checks.s1 = !no_s1;
      o.checks.s2 = !no_s2;
      o.checks.strict_unique_question = strict;
      if (!delay_str.empty()) o.faults.delay = parse_delay_spec(delay_str);
      if (run->count("--timeout-qr")) o.timeouts.q_r = qr;
      if (run->count("--timeout-qo")) o.timeouts.q_o = qo;
      if (run->count("--timeout-total")) o.timeouts.total = total;
      return run_command(config_path, std::move(o), set_flags);
    }
    // replay
    ReplayChecks rc{false, false, false};
    std::stringstream ss(checks_str);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "s1") rc.s1 = true;
      else if (item == "s2") rc.s2 = true;
      else if (item == "liveness") rc.liveness = true;
      else if (!item.empty()) throw ConfigError({"unknown check '" + item + "'"});
    }
    RunReport report = replay(log_path, rc);
    print_report(std::cout, report);
    return report.exit_code();
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
