#include "distcheck/pattern.hpp"

#include <set>

namespace distcheck {

const Value& Env::at(const std::string& name) const {
  const Value* v = find(name);
  if (!v) throw Error("unbound variable: " + name);
  return *v;
}

std::optional<Env> Env::bind(const std::string& name, const Value& v) const {
  if (const Value* cur = find(name)) {
    if (*cur == v) return *this;
    return std::nullopt;
  }
  Env out = *this;
  out.vars_.emplace(name, v);
  return out;
}

Value Env::to_value() const {
  std::vector<Value> pairs;
  pairs.reserve(vars_.size());
  for (const auto& [name, v] : vars_)
    pairs.push_back(Value::tuple({Value::text(name), v}));
  return Value::tuple(std::move(pairs));
}

std::string Env::str() const {
  std::string out = "{";
  bool first = true;
  for (const auto& [name, v] : vars_) {
    if (!first) out += ", ";
    first = false;
    out += name + "=" + encode(v);
  }
  return out + "}";
}

Pattern Pattern::constant(Value v) {
  return Pattern(std::make_shared<Data>(Data{Kind::Const, std::move(v), {}, {}}));
}

Pattern Pattern::bound(std::string name) {
  if (name.empty()) throw PatternError("bound variable needs a name");
  return Pattern(std::make_shared<Data>(Data{Kind::Bound, std::nullopt, std::move(name), {}}));
}

Pattern Pattern::free(std::string name) {
  if (name.empty()) throw PatternError("fresh variable needs a name");
  return Pattern(std::make_shared<Data>(Data{Kind::Free, std::nullopt, std::move(name), {}}));
}

Pattern Pattern::wildcard() {
  return Pattern(std::make_shared<Data>(Data{Kind::Wildcard, std::nullopt, {}, {}}));
}

namespace {

void collect_free(const Pattern& p, std::vector<std::string>& out) {
  switch (p.kind()) {
    case Pattern::Kind::Free:
      out.push_back(p.name());
      return;
    case Pattern::Kind::Tuple:
      for (const auto& item : p.items()) collect_free(item, out);
      return;
    default:
      return;
  }
}

}  // namespace

Pattern Pattern::tuple(std::vector<Pattern> items) {
  Pattern p(std::make_shared<Data>(Data{Kind::Tuple, std::nullopt, {}, std::move(items)}));
  std::vector<std::string> names = p.free_names();
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second)
      throw PatternError("fresh variable '" + n + "' appears more than once in pattern");
  }
  return p;
}

std::vector<std::string> Pattern::free_names() const {
  std::vector<std::string> out;
  collect_free(*this, out);
  return out;
}

std::optional<Env> Pattern::match(const Value& v, const Env& env) const {
  switch (kind()) {
    case Kind::Const:
      if (value() == v) return env;
      return std::nullopt;
    case Kind::Wildcard:
      return env;
    case Kind::Bound: {
      const Value* cur = env.find(name());
      if (cur && *cur == v) return env;
      return std::nullopt;
    }
    case Kind::Free:
      return env.bind(name(), v);
    case Kind::Tuple: {
      if (!v.is(Value::Kind::Tuple)) return std::nullopt;
      const auto& vs = v.items();
      if (vs.size() != items().size()) return std::nullopt;
      Env cur = env;
      for (std::size_t i = 0; i < vs.size(); ++i) {
        auto next = items()[i].match(vs[i], cur);
        if (!next) return std::nullopt;
        cur = std::move(*next);
      }
      return cur;
    }
  }
  return std::nullopt;
}

}  // namespace distcheck
