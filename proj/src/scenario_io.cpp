#include "distcheck/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace distcheck {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& known,
                const std::string& where, std::vector<std::string>& problems) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (known.count(it.key()) == 0)
      problems.push_back("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void get_to(const json& obj, const char* key, T& out, std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    problems.push_back(std::string("bad value for '") + key + "'");
  }
}

}  // namespace

DelaySpec parse_delay_spec(const std::string& spec) {
  if (spec.empty() || spec == "none") return DelaySpec::none();
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  try {
    if (kind == "fixed") return DelaySpec::fixed(std::stod(rest));
    if (kind == "uniform") {
      auto comma = rest.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      return DelaySpec::uniform(std::stod(rest.substr(0, comma)),
                                std::stod(rest.substr(comma + 1)));
    }
  } catch (const std::exception&) {
    // falls through to the error below
  }
  throw ConfigError({"bad delay spec '" + spec + "' (use none, fixed:S, or uniform:LO,HI)"});
}

PollingScenario scenario_from_json(const std::string& json_text) {
  std::vector<std::string> problems;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"config must be a JSON object"});

  PollingScenario s;
  check_keys(root,
             {"pollees", "runs", "seed", "mode", "question", "clocks", "channel_order",
              "checks", "timeouts", "faults", "export_log", "max_wall_secs"},
             "config", problems);
  get_to(root, "pollees", s.num_pollees, problems);
  get_to(root, "runs", s.runs, problems);
  get_to(root, "seed", s.seed, problems);
  get_to(root, "question", s.question, problems);
  get_to(root, "clocks", s.logical_clocks, problems);
  get_to(root, "export_log", s.export_log, problems);
  get_to(root, "max_wall_secs", s.max_wall_secs, problems);
  if (root.contains("mode")) {
    std::string m = root["mode"].is_string() ? root["mode"].get<std::string>() : "";
    if (m == "det") s.mode = ExecMode::Deterministic;
    else if (m == "conc") s.mode = ExecMode::Concurrent;
    else problems.push_back("mode must be 'det' or 'conc'");
  }
  if (root.contains("channel_order")) {
    std::string m =
        root["channel_order"].is_string() ? root["channel_order"].get<std::string>() : "";
    if (m == "fifo") s.channel_order = ChannelOrder::Fifo;
    else if (m == "arbitrary") s.channel_order = ChannelOrder::Arbitrary;
    else problems.push_back("channel_order must be 'fifo' or 'arbitrary'");
  }
  if (root.contains("checks")) {
    const json& c = root["checks"];
    if (!c.is_object()) {
      problems.push_back("checks must be an object");
    } else {
      check_keys(c, {"s1", "s2", "strict_unique_question"}, "checks", problems);
      get_to(c, "s1", s.checks.s1, problems);
      get_to(c, "s2", s.checks.s2, problems);
      get_to(c, "strict_unique_question", s.checks.strict_unique_question, problems);
    }
  }
  if (root.contains("timeouts")) {
    const json& t = root["timeouts"];
    if (!t.is_object()) {
      problems.push_back("timeouts must be an object");
    } else {
      check_keys(t, {"q-r", "q-o", "total"}, "timeouts", problems);
      double v;
      if (t.contains("q-r")) { get_to(t, "q-r", v, problems); s.timeouts.q_r = v; }
      if (t.contains("q-o")) { get_to(t, "q-o", v, problems); s.timeouts.q_o = v; }
      if (t.contains("total")) { get_to(t, "total", v, problems); s.timeouts.total = v; }
    }
  }
  if (root.contains("faults")) {
    const json& f = root["faults"];
    if (!f.is_object()) {
      problems.push_back("faults must be an object");
    } else {
      check_keys(f,
                 {"loss", "dup", "delay", "reorder", "corrupt", "corrupt_prob", "seed",
                  "scope_kinds", "scope_tags"},
                 "faults", problems);
      get_to(f, "loss", s.faults.loss_prob, problems);
      get_to(f, "dup", s.faults.dup_prob, problems);
      get_to(f, "reorder", s.faults.reorder_holdback, problems);
      get_to(f, "corrupt", s.faults.corrupt_name, problems);
      get_to(f, "corrupt_prob", s.faults.corrupt_prob, problems);
      get_to(f, "seed", s.faults.seed, problems);
      if (f.contains("delay")) {
        std::string d = f["delay"].is_string() ? f["delay"].get<std::string>() : "?";
        try {
          s.faults.delay = parse_delay_spec(d);
        } catch (const ConfigError& e) {
          problems.insert(problems.end(), e.problems.begin(), e.problems.end());
        }
      }
      if (f.contains("scope_kinds")) {
        std::vector<std::string> ks;
        get_to(f, "scope_kinds", ks, problems);
        s.faults.scope.sender_kinds = {ks.begin(), ks.end()};
      }
      if (f.contains("scope_tags")) {
        std::vector<std::string> ts;
        get_to(f, "scope_tags", ts, problems);
        s.faults.scope.payload_tags = {ts.begin(), ts.end()};
      }
    }
  }
  auto vp = s.validate();
  problems.insert(problems.end(), vp.begin(), vp.end());
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return s;
}

PollingScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path});
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

}  // namespace distcheck
