#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace distcheck {

/// Identity of a spawned process: a kind tag ("P", "R", "Checker") plus a
/// runtime-unique sequence number. Printable as a short tag like <R:a003>.
/// Sequence numbers are globally ordered, which gives the deterministic
/// iteration order used for witness selection and set rendering.
struct ProcessId {
  std::string kind;
  std::uint32_t seq = 0;

  bool valid() const { return !kind.empty(); }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%x", seq);
    return "<" + kind + ":" + buf + ">";
  }

  /// Parses the printable form; returns nullopt on malformed input.
  static std::optional<ProcessId> parse(std::string_view s) {
    if (s.size() < 5 || s.front() != '<' || s.back() != '>') return {};
    s = s.substr(1, s.size() - 2);
    auto colon = s.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) return {};
    ProcessId id;
    id.kind = std::string(s.substr(0, colon));
    for (char c : id.kind) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return {};
    }
    std::uint64_t v = 0;
    for (char c : s.substr(colon + 1)) {
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else return {};
      v = v * 16 + static_cast<std::uint64_t>(d);
      if (v > 0xffffffffULL) return {};
    }
    id.seq = static_cast<std::uint32_t>(v);
    return id;
  }

  friend bool operator==(const ProcessId& a, const ProcessId& b) {
    return a.seq == b.seq && a.kind == b.kind;
  }
  friend bool operator!=(const ProcessId& a, const ProcessId& b) { return !(a == b); }
  friend bool operator<(const ProcessId& a, const ProcessId& b) {
    if (a.seq != b.seq) return a.seq < b.seq;
    return a.kind < b.kind;
  }

  friend std::ostream& operator<<(std::ostream& os, const ProcessId& id) {
    return os << id.str();
  }
};

}  // namespace distcheck
