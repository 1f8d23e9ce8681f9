#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "distcheck/observe.hpp"
#include "distcheck/pattern.hpp"
#include "distcheck/value.hpp"

namespace distcheck {

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Domain clause of a quantifier: either membership of a pattern in a
/// finite value collection, or an observation-log query whose patterns bind
/// variables. Clauses join left to right, threading the environment.
struct InClause {
  Pattern pat;
  std::vector<Value> domain;
};
struct QueryClause {
  LogQuery query;
};
using Clause = std::variant<InClause, QueryClause>;

/// Value-producing term: constant, variable, count of distinct satisfying
/// assignments, or set of expression values over satisfying assignments.
class Term {
 public:
  struct Const {
    Value v;
  };
  struct Var {
    std::string name;
  };
  struct Count {
    std::vector<Clause> clauses;
  };
  struct SetOf {
    std::shared_ptr<Term> expr;
    std::vector<Clause> clauses;
  };

  static Term constant(Value v) { return Term{Const{std::move(v)}}; }
  static Term var(std::string name) { return Term{Var{std::move(name)}}; }
  static Term count_of(std::vector<Clause> clauses) { return Term{Count{std::move(clauses)}}; }
  static Term set_of(Term expr, std::vector<Clause> clauses) {
    return Term{SetOf{std::make_shared<Term>(std::move(expr)), std::move(clauses)}};
  }

  std::variant<Var, Const, Count, SetOf> node;
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

/// Quantified formula tree over observation logs: each/some with domain
/// clauses, atomic query existence, comparisons, boolean connectives.
/// Evaluation over finite domains always terminates and never mutates the log.
struct Formula {
  struct Truth {
    bool value;
  };
  struct Exists {
    LogQuery query;
  };
  struct Each {
    std::vector<Clause> clauses;
    FormulaPtr body;
  };
  struct Some {
    std::vector<Clause> clauses;
    FormulaPtr body;
  };
  struct Cmp {
    Term lhs;
    CmpOp op;
    Term rhs;
  };
  struct And {
    std::vector<FormulaPtr> parts;
  };
  struct Or {
    std::vector<FormulaPtr> parts;
  };
  struct Not {
    FormulaPtr inner;
  };

  std::variant<Truth, Exists, Each, Some, Cmp, And, Or, Not> node;

  static FormulaPtr truth(bool v);
  static FormulaPtr exists(LogQuery q);
  static FormulaPtr each(std::vector<Clause> clauses, FormulaPtr body);
  static FormulaPtr some(std::vector<Clause> clauses, FormulaPtr body);
  static FormulaPtr cmp(Term lhs, CmpOp op, Term rhs);
  static FormulaPtr conj(std::vector<FormulaPtr> parts);
  static FormulaPtr disj(std::vector<FormulaPtr> parts);
  static FormulaPtr negate(FormulaPtr inner);
};

enum class Verdict { Pass, Fail };

/// Verdict plus witness: a satisfying assignment for a passing Some, a
/// violating assignment for a failing Each.
struct CheckResult {
  Verdict verdict = Verdict::Fail;
  std::optional<Env> witness;
  std::string detail;

  bool passed() const { return verdict == Verdict::Pass; }
};

/// Finite-domain evaluation. Each over an empty domain passes, Some fails.
/// Unbound variables or type-confused comparisons throw FormulaError.
CheckResult eval(const Formula& f, const ObservationLog& log, const Env& env = {});

/// Enumerates clause assignments in deterministic order; stops when the
/// visitor returns true. Shared by eval and the liveness monitor.
bool for_assignments(const std::vector<Clause>& clauses, const ObservationLog& log,
                     const Env& env, const std::function<bool(const Env&)>& visit);

// --- polling reference properties ------------------------------------------

/// S1: some question send (binding its id t) and outcome send at t1 such
/// that every pollee's reply to t was received by the poller at t2 < t1.
/// `strict` adds the uniqueness conjunct: exactly one distinct question id.
FormulaPtr s1_formula(const ProcessId& poller, const std::vector<ProcessId>& pollees,
                      bool strict = false);

/// S2: some outcome o sent by the poller such that every pollee reported
/// receiving exactly o.
FormulaPtr s2_formula(const ProcessId& poller, const std::vector<ProcessId>& pollees);

/// End of polling: every pollee reported receiving an outcome. Monotone.
FormulaPtr end_formula(const std::vector<ProcessId>& pollees);

/// The poller's question send, binding the question id as `t`. Used as the
/// trigger of both liveness deadlines.
LogQuery question_sent_query(const ProcessId& poller);

/// Some pollee's reply to the triggering question (id pre-bound as `t`) was
/// received by the poller.
FormulaPtr first_reply_formula(const ProcessId& poller,
                               const std::vector<ProcessId>& pollees);

CheckResult check_S1(const ObservationLog& log, const ProcessId& poller,
                     const std::vector<ProcessId>& pollees, bool strict = false);
CheckResult check_S2(const ObservationLog& log, const ProcessId& poller,
                     const std::vector<ProcessId>& pollees);
bool detect_end(const ObservationLog& log, const ProcessId& poller,
                const std::vector<ProcessId>& pollees);

}  // namespace distcheck
