#include "distcheck/property.hpp"

#include <functional>
#include <set>

namespace distcheck {

FormulaPtr Formula::truth(bool v) { return std::make_shared<Formula>(Formula{Truth{v}}); }
FormulaPtr Formula::exists(LogQuery q) {
  return std::make_shared<Formula>(Formula{Exists{std::move(q)}});
}
FormulaPtr Formula::each(std::vector<Clause> clauses, FormulaPtr body) {
  return std::make_shared<Formula>(Formula{Each{std::move(clauses), std::move(body)}});
}
FormulaPtr Formula::some(std::vector<Clause> clauses, FormulaPtr body) {
  return std::make_shared<Formula>(Formula{Some{std::move(clauses), std::move(body)}});
}
FormulaPtr Formula::cmp(Term lhs, CmpOp op, Term rhs) {
  return std::make_shared<Formula>(Formula{Cmp{std::move(lhs), op, std::move(rhs)}});
}
FormulaPtr Formula::conj(std::vector<FormulaPtr> parts) {
  return std::make_shared<Formula>(Formula{And{std::move(parts)}});
}
FormulaPtr Formula::disj(std::vector<FormulaPtr> parts) {
  return std::make_shared<Formula>(Formula{Or{std::move(parts)}});
}
FormulaPtr Formula::negate(FormulaPtr inner) {
  return std::make_shared<Formula>(Formula{Not{std::move(inner)}});
}

namespace {

bool visit_clauses(const std::vector<Clause>& clauses, std::size_t i,
                   const ObservationLog& log, const Env& env,
                   const std::function<bool(const Env&)>& visit) {
  if (i == clauses.size()) return visit(env);
  const Clause& c = clauses[i];
  if (const auto* in = std::get_if<InClause>(&c)) {
    for (const Value& v : in->domain) {
      auto m = in->pat.match(v, env);
      if (!m) continue;
      if (visit_clauses(clauses, i + 1, log, *m, visit)) return true;
    }
    return false;
  }
  const auto& q = std::get<QueryClause>(c).query;
  for (const auto& rec : log) {
    auto m = match_record(q, rec, env);
    if (!m) continue;
    if (visit_clauses(clauses, i + 1, log, *m, visit)) return true;
  }
  return false;
}

Value eval_term(const Term& t, const ObservationLog& log, const Env& env);

Value eval_count(const Term::Count& c, const ObservationLog& log, const Env& env) {
  std::set<std::string> distinct;
  for_assignments(c.clauses, log, env, [&](const Env& a) {
    distinct.insert(encode(a.to_value()));
    return false;
  });
  return Value::integer(static_cast<std::int64_t>(distinct.size()));
}

Value eval_set_of(const Term::SetOf& s, const ObservationLog& log, const Env& env) {
  std::vector<Value> vals;
  for_assignments(s.clauses, log, env, [&](const Env& a) {
    vals.push_back(eval_term(*s.expr, log, a));
    return false;
  });
  return Value::set(std::move(vals));
}

Value eval_term(const Term& t, const ObservationLog& log, const Env& env) {
  if (const auto* v = std::get_if<Term::Var>(&t.node)) {
    const Value* bound = env.find(v->name);
    if (!bound) throw FormulaError("unbound variable in formula: " + v->name);
    return *bound;
  }
  if (const auto* c = std::get_if<Term::Const>(&t.node)) return c->v;
  if (const auto* c = std::get_if<Term::Count>(&t.node)) return eval_count(*c, log, env);
  return eval_set_of(std::get<Term::SetOf>(t.node), log, env);
}

bool eval_cmp(const Formula::Cmp& c, const ObservationLog& log, const Env& env) {
  Value lhs = eval_term(c.lhs, log, env);
  Value rhs = eval_term(c.rhs, log, env);
  switch (c.op) {
    case CmpOp::Eq:
      return lhs == rhs;
    case CmpOp::Ne:
      return lhs != rhs;
    default:
      break;
  }
  if (!lhs.is(Value::Kind::Int) || !rhs.is(Value::Kind::Int))
    throw FormulaError("ordered comparison requires integers, got " + encode(lhs) + " vs " +
                       encode(rhs));
  std::int64_t a = lhs.as_int(), b = rhs.as_int();
  switch (c.op) {
    case CmpOp::Lt:
      return a < b;
    case CmpOp::Le:
      return a <= b;
    case CmpOp::Gt:
      return a > b;
    case CmpOp::Ge:
      return a >= b;
    default:
      return false;
  }
}

CheckResult pass_result(std::optional<Env> witness, std::string detail = "") {
  return CheckResult{Verdict::Pass, std::move(witness), std::move(detail)};
}

CheckResult fail_result(std::optional<Env> witness, std::string detail = "") {
  return CheckResult{Verdict::Fail, std::move(witness), std::move(detail)};
}

}  // namespace

bool for_assignments(const std::vector<Clause>& clauses, const ObservationLog& log,
                     const Env& env, const std::function<bool(const Env&)>& visit) {
  return visit_clauses(clauses, 0, log, env, visit);
}

CheckResult eval(const Formula& f, const ObservationLog& log, const Env& env) {
  if (const auto* t = std::get_if<Formula::Truth>(&f.node)) {
    return t->value ? pass_result(std::nullopt) : fail_result(std::nullopt);
  }
  if (const auto* e = std::get_if<Formula::Exists>(&f.node)) {
    for (const auto& rec : log) {
      if (auto m = match_record(e->query, rec, env))
        return pass_result(m->empty() ? std::nullopt : std::optional<Env>(*m));
    }
    return fail_result(std::nullopt, "no matching observation");
  }
  if (const auto* each = std::get_if<Formula::Each>(&f.node)) {
    CheckResult violation = pass_result(std::nullopt);
    bool violated = for_assignments(each->clauses, log, env, [&](const Env& a) {
      CheckResult body = eval(*each->body, log, a);
      if (body.passed()) return false;
      violation = fail_result(body.witness ? body.witness : std::optional<Env>(a),
                              body.detail.empty() ? "each: body violated" : body.detail);
      return true;
    });
    if (violated) return violation;
    return pass_result(std::nullopt);
  }
  if (const auto* some = std::get_if<Formula::Some>(&f.node)) {
    CheckResult found = fail_result(std::nullopt, "some: no satisfying assignment");
    bool satisfied = for_assignments(some->clauses, log, env, [&](const Env& a) {
      CheckResult body = eval(*some->body, log, a);
      if (!body.passed()) {
        if (!found.witness)
          found = fail_result(body.witness ? body.witness : std::optional<Env>(a),
                              body.detail.empty() ? "some: body violated" : body.detail);
        return false;
      }
      found = pass_result(body.witness ? body.witness : std::optional<Env>(a));
      return true;
    });
    if (satisfied) return found;
    return found.passed() ? fail_result(std::nullopt) : found;
  }
  if (const auto* c = std::get_if<Formula::Cmp>(&f.node)) {
    return eval_cmp(*c, log, env) ? pass_result(std::nullopt)
                                  : fail_result(std::nullopt, "comparison false");
  }
  if (const auto* a = std::get_if<Formula::And>(&f.node)) {
    for (const auto& part : a->parts) {
      CheckResult r = eval(*part, log, env);
      if (!r.passed()) return r;
    }
    return pass_result(std::nullopt);
  }
  if (const auto* o = std::get_if<Formula::Or>(&f.node)) {
    for (const auto& part : o->parts) {
      CheckResult r = eval(*part, log, env);
      if (r.passed()) return r;
    }
    return fail_result(std::nullopt, "no disjunct holds");
  }
  const auto& n = std::get<Formula::Not>(f.node);
  CheckResult r = eval(*n.inner, log, env);
  return r.passed() ? fail_result(std::nullopt) : pass_result(std::nullopt);
}

// ---------------------------------------------------------------------------
// Polling reference properties

namespace {

std::vector<Value> pid_values(const std::vector<ProcessId>& pids) {
  std::vector<Value> out;
  out.reserve(pids.size());
  for (const auto& p : pids) out.push_back(Value::pid(p));
  return out;
}

}  // namespace

LogQuery question_sent_query(const ProcessId& poller) {
  return LogQuery{Direction::Sent, Pattern::constant(Value::pid(poller)),
                  Pattern::tuple({Pattern::constant(Value::atom("question")),
                                  Pattern::wildcard(), Pattern::free("t")}),
                  std::nullopt, std::nullopt};
}

FormulaPtr first_reply_formula(const ProcessId& poller,
                               const std::vector<ProcessId>& pollees) {
  LogQuery reply_rcvd{Direction::Rcvd, Pattern::constant(Value::pid(poller)),
                      Pattern::tuple({Pattern::constant(Value::atom("reply")),
                                      Pattern::wildcard(), Pattern::bound("t")}),
                      Pattern::bound("r"), std::nullopt};
  return Formula::some({InClause{Pattern::free("r"), pid_values(pollees)},
                        QueryClause{reply_rcvd}},
                       Formula::truth(true));
}

FormulaPtr s1_formula(const ProcessId& poller, const std::vector<ProcessId>& pollees,
                      bool strict) {
  LogQuery outcome_sent{Direction::Sent, Pattern::constant(Value::pid(poller)),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::wildcard()}),
                        std::nullopt, Pattern::free("t1")};
  LogQuery reply_rcvd{Direction::Rcvd, Pattern::constant(Value::pid(poller)),
                      Pattern::tuple({Pattern::constant(Value::atom("reply")),
                                      Pattern::wildcard(), Pattern::bound("t")}),
                      Pattern::bound("r"), Pattern::free("t2")};
  FormulaPtr reply_before_outcome =
      Formula::some({QueryClause{reply_rcvd}},
                    Formula::cmp(Term::var("t1"), CmpOp::Gt, Term::var("t2")));
  FormulaPtr all_pollees = Formula::each(
      {InClause{Pattern::free("r"), pid_values(pollees)}}, reply_before_outcome);
  FormulaPtr main = Formula::some(
      {QueryClause{question_sent_query(poller)}, QueryClause{outcome_sent}}, all_pollees);
  if (!strict) return main;
  FormulaPtr unique_question =
      Formula::cmp(Term::count_of({QueryClause{question_sent_query(poller)}}), CmpOp::Eq,
                   Term::constant(Value::integer(1)));
  return Formula::conj({unique_question, main});
}

FormulaPtr s2_formula(const ProcessId& poller, const std::vector<ProcessId>& pollees) {
  LogQuery outcome_sent{Direction::Sent, Pattern::constant(Value::pid(poller)),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::free("o")}),
                        std::nullopt, std::nullopt};
  LogQuery outcome_rcvd{Direction::Rcvd, Pattern::bound("r"),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::bound("o")}),
                        std::nullopt, std::nullopt};
  return Formula::some(
      {QueryClause{outcome_sent}},
      Formula::each({InClause{Pattern::free("r"), pid_values(pollees)}},
                    Formula::some({QueryClause{outcome_rcvd}}, Formula::truth(true))));
}

FormulaPtr end_formula(const std::vector<ProcessId>& pollees) {
  LogQuery outcome_rcvd{Direction::Rcvd, Pattern::bound("r"),
                        Pattern::tuple({Pattern::constant(Value::atom("outcome")),
                                        Pattern::wildcard()}),
                        std::nullopt, std::nullopt};
  return Formula::each({InClause{Pattern::free("r"), pid_values(pollees)}},
                       Formula::exists(outcome_rcvd));
}

CheckResult check_S1(const ObservationLog& log, const ProcessId& poller,
                     const std::vector<ProcessId>& pollees, bool strict) {
  return eval(*s1_formula(poller, pollees, strict), log);
}

CheckResult check_S2(const ObservationLog& log, const ProcessId& poller,
                     const std::vector<ProcessId>& pollees) {
  return eval(*s2_formula(poller, pollees), log);
}

bool detect_end(const ObservationLog& log, const ProcessId& poller,
                const std::vector<ProcessId>& pollees) {
  (void)poller;
  return eval(*end_formula(pollees), log).passed();
}

}  // namespace distcheck
