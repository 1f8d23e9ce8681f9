#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "distcheck/value.hpp"

namespace distcheck {

/// Variable bindings produced by pattern matching. Bindings are never
/// silently overwritten: binding a name to a conflicting value fails.
class Env {
 public:
  Env() = default;

  bool has(const std::string& name) const { return vars_.count(name) != 0; }
  const Value* find(const std::string& name) const {
    auto it = vars_.find(name);
    return it == vars_.end() ? nullptr : &it->second;
  }
  const Value& at(const std::string& name) const;

  /// Returns the extended environment, or nullopt if `name` is already bound
  /// to a different value. Rebinding the same value is a no-op.
  std::optional<Env> bind(const std::string& name, const Value& v) const;

  std::size_t size() const { return vars_.size(); }
  bool empty() const { return vars_.empty(); }
  auto begin() const { return vars_.begin(); }
  auto end() const { return vars_.end(); }

  friend bool operator==(const Env& a, const Env& b) { return a.vars_ == b.vars_; }

  /// Tuple of (name, value) pairs in name order; used for machine-readable
  /// witness lines and for deduplicating assignments.
  Value to_value() const;
  /// Human form: {r=<R:a003>, t=5}
  std::string str() const;

 private:
  std::map<std::string, Value> vars_;
};

/// Matcher over Values. Positions are constants, previously-bound variables
/// (must equal the current binding), fresh variables (bind on match),
/// wildcards, or tuples of sub-patterns. A fresh variable name may appear at
/// most once per pattern; construction rejects repeats.
class Pattern {
 public:
  enum class Kind { Const, Bound, Free, Wildcard, Tuple };

  static Pattern constant(Value v);
  static Pattern bound(std::string name);
  static Pattern free(std::string name);
  static Pattern wildcard();
  static Pattern tuple(std::vector<Pattern> items);

  Kind kind() const { return data_->kind; }
  const Value& value() const { return *data_->value; }
  const std::string& name() const { return data_->name; }
  const std::vector<Pattern>& items() const { return data_->items; }

  /// Deterministic match: extends env with fresh bindings on success, nullopt
  /// on failure; no partial bindings escape. A bound variable absent from the
  /// environment fails the match.
  std::optional<Env> match(const Value& v, const Env& env) const;

  /// Names this pattern binds (fresh variables), in left-to-right order.
  std::vector<std::string> free_names() const;

 private:
  struct Data {
    Kind kind;
    std::optional<Value> value;
    std::string name;
    std::vector<Pattern> items;
  };
  explicit Pattern(std::shared_ptr<const Data> d) : data_(std::move(d)) {}
  std::shared_ptr<const Data> data_;
};

inline std::optional<Env> match(const Pattern& p, const Value& v, const Env& env) {
  return p.match(v, env);
}

}  // namespace distcheck
