#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "distcheck/base.hpp"
#include "distcheck/pid.hpp"

namespace distcheck {

/// Immutable message payload tree. The universe is closed: atoms, signed
/// integers, text, process ids, tuples, and sets. Equality is structural;
/// sets are canonicalized (sorted, deduplicated) at construction so set
/// equality ignores order and duplicates and the text encoding is canonical.
///
/// Values are cheap to copy (shared immutable nodes) and safe to share
/// across concurrently executing processes.
class Value {
 public:
  enum class Kind { Atom, Int, Text, Pid, Tuple, Set };

  /// Atom tags are restricted to [A-Za-z_][A-Za-z0-9_-]*; throws Error otherwise.
  static Value atom(std::string_view tag);
  static Value integer(std::int64_t v);
  static Value text(std::string_view s);
  static Value pid(ProcessId id);
  static Value tuple(std::vector<Value> items);
  static Value set(std::vector<Value> items);

  Kind kind() const { return data_->kind; }
  bool is(Kind k) const { return kind() == k; }

  const std::string& as_atom() const;
  std::int64_t as_int() const;
  const std::string& as_text() const;
  const ProcessId& as_pid() const;
  /// Elements of a tuple or set (sets in canonical order).
  const std::vector<Value>& items() const;

  friend bool operator==(const Value& a, const Value& b) { return cmp(a, b) == 0; }
  friend bool operator!=(const Value& a, const Value& b) { return cmp(a, b) != 0; }
  friend bool operator<(const Value& a, const Value& b) { return cmp(a, b) < 0; }

  /// Total order: kind rank first, then content (lexicographic for
  /// tuples/sets). Used for set canonicalization and deterministic output.
  static int cmp(const Value& a, const Value& b);

  friend std::ostream& operator<<(std::ostream& os, const Value& v);

 private:
  struct Data {
    Kind kind;
    std::variant<std::string, std::int64_t, ProcessId, std::vector<Value>> rep;
  };
  explicit Value(std::shared_ptr<const Data> d) : data_(std::move(d)) {}
  std::shared_ptr<const Data> data_;
};

/// Canonical text encoding. Grammar (documented in the README):
///   atom   'tag'            int    -?[0-9]+
///   text   "..." (escapes \\ \" \n \t \r \xHH)
///   pid    <Kind:hexseq>
///   tuple  (v, v, ...)      set    {v, v, ...}   (canonical order)
std::string encode(const Value& v);

/// Inverse of encode; throws DecodeError on malformed input.
Value decode(std::string_view text);

}  // namespace distcheck
