#include "distcheck/value.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace distcheck {

namespace {

bool valid_atom_tag(std::string_view tag) {
  if (tag.empty()) return false;
  char c0 = tag.front();
  if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_')) return false;
  for (char c : tag) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

int cmp_int(std::int64_t a, std::int64_t b) { return a < b ? -1 : (a > b ? 1 : 0); }

}  // namespace

Value Value::atom(std::string_view tag) {
  if (!valid_atom_tag(tag))
    throw Error("invalid atom tag: '" + std::string(tag) + "'");
  return Value(std::make_shared<Data>(Data{Kind::Atom, std::string(tag)}));
}

Value Value::integer(std::int64_t v) {
  return Value(std::make_shared<Data>(Data{Kind::Int, v}));
}

Value Value::text(std::string_view s) {
  return Value(std::make_shared<Data>(Data{Kind::Text, std::string(s)}));
}

Value Value::pid(ProcessId id) {
  if (!id.valid()) throw Error("invalid process id value");
  return Value(std::make_shared<Data>(Data{Kind::Pid, std::move(id)}));
}

Value Value::tuple(std::vector<Value> items) {
  return Value(std::make_shared<Data>(Data{Kind::Tuple, std::move(items)}));
}

Value Value::set(std::vector<Value> items) {
  std::sort(items.begin(), items.end(),
            [](const Value& a, const Value& b) { return cmp(a, b) < 0; });
  items.erase(std::unique(items.begin(), items.end(),
                          [](const Value& a, const Value& b) { return cmp(a, b) == 0; }),
              items.end());
  return Value(std::make_shared<Data>(Data{Kind::Set, std::move(items)}));
}

const std::string& Value::as_atom() const {
  if (kind() != Kind::Atom) throw Error("value is not an atom");
  return std::get<std::string>(data_->rep);
}

std::int64_t Value::as_int() const {
  if (kind() != Kind::Int) throw Error("value is not an int");
  return std::get<std::int64_t>(data_->rep);
}

const std::string& Value::as_text() const {
  if (kind() != Kind::Text) throw Error("value is not text");
  return std::get<std::string>(data_->rep);
}

const ProcessId& Value::as_pid() const {
  if (kind() != Kind::Pid) throw Error("value is not a process id");
  return std::get<ProcessId>(data_->rep);
}

const std::vector<Value>& Value::items() const {
  if (kind() != Kind::Tuple && kind() != Kind::Set)
    throw Error("value is not a tuple or set");
  return std::get<std::vector<Value>>(data_->rep);
}

int Value::cmp(const Value& a, const Value& b) {
  auto rank = [](Kind k) { return static_cast<int>(k); };
  if (a.kind() != b.kind()) return rank(a.kind()) < rank(b.kind()) ? -1 : 1;
  switch (a.kind()) {
    case Kind::Atom:
    case Kind::Text: {
      const auto& sa = std::get<std::string>(a.data_->rep);
      const auto& sb = std::get<std::string>(b.data_->rep);
      int c = sa.compare(sb);
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Kind::Int:
      return cmp_int(std::get<std::int64_t>(a.data_->rep), std::get<std::int64_t>(b.data_->rep));
    case Kind::Pid: {
      const auto& pa = std::get<ProcessId>(a.data_->rep);
      const auto& pb = std::get<ProcessId>(b.data_->rep);
      if (pa.seq != pb.seq) return pa.seq < pb.seq ? -1 : 1;
      int c = pa.kind.compare(pb.kind);
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Kind::Tuple:
    case Kind::Set: {
      const auto& va = std::get<std::vector<Value>>(a.data_->rep);
      const auto& vb = std::get<std::vector<Value>>(b.data_->rep);
      std::size_t n = std::min(va.size(), vb.size());
      for (std::size_t i = 0; i < n; ++i) {
        int c = cmp(va[i], vb[i]);
        if (c != 0) return c;
      }
      return cmp_int(static_cast<std::int64_t>(va.size()), static_cast<std::int64_t>(vb.size()));
    }
  }
  return 0;
}

namespace {

void encode_to(const Value& v, std::string& out) {
  switch (v.kind()) {
    case Value::Kind::Atom:
      out += '\'';
      out += v.as_atom();
      out += '\'';
      return;
    case Value::Kind::Int:
      out += std::to_string(v.as_int());
      return;
    case Value::Kind::Text: {
      out += '"';
      for (unsigned char c : v.as_text()) {
        switch (c) {
          case '"': out += "\\\""; break;
          case '\\': out += "\\\\"; break;
          case '\n': out += "\\n"; break;
          case '\t': out += "\\t"; break;
          case '\r': out += "\\r"; break;
          default:
            if (c < 0x20 || c == 0x7f) {
              char buf[8];
              std::snprintf(buf, sizeof buf, "\\x%02x", c);
              out += buf;
            } else {
              out += static_cast<char>(c);
            }
        }
      }
      out += '"';
      return;
    }
    case Value::Kind::Pid:
      out += v.as_pid().str();
      return;
    case Value::Kind::Tuple:
    case Value::Kind::Set: {
      const char open = v.kind() == Value::Kind::Tuple ? '(' : '{';
      const char close = v.kind() == Value::Kind::Tuple ? ')' : '}';
      out += open;
      bool first = true;
      for (const auto& item : v.items()) {
        if (!first) out += ", ";
        first = false;
        encode_to(item, out);
      }
      out += close;
      return;
    }
  }
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Value parse() {
    Value v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw DecodeError(pos_, msg); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  char peek() {
    if (pos_ >= s_.size()) fail("unexpected end of input");
    return s_[pos_];
  }

  char take() {
    char c = peek();
    ++pos_;
    return c;
  }

  void expect(char c) {
    if (take() != c) fail(std::string("expected '") + c + "'");
  }

  Value value() {
    skip_ws();
    char c = peek();
    if (c == '\'') return atom();
    if (c == '"') return text();
    if (c == '<') return pid();
    if (c == '(') return sequence('(', ')', /*is_set=*/false);
    if (c == '{') return sequence('{', '}', /*is_set=*/true);
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return integer();
    fail("unexpected character");
  }

  Value atom() {
    expect('\'');
    std::string tag;
    while (peek() != '\'') tag += take();
    expect('\'');
    if (!valid_atom_tag(tag)) fail("invalid atom tag");
    return Value::atom(tag);
  }

  Value integer() {
    std::size_t start = pos_;
    if (peek() == '-') take();
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected digit");
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::int64_t v = 0;
    try {
      v = std::stoll(std::string(s_.substr(start, pos_ - start)));
    } catch (const std::exception&) {
      fail("integer out of range");
    }
    return Value::integer(v);
  }

  Value text() {
    expect('"');
    std::string out;
    for (;;) {
      char c = take();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      char e = take();
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'x': {
          int hi = hex_digit(take());
          int lo = hex_digit(take());
          out += static_cast<char>(hi * 16 + lo);
          break;
        }
        default: fail("bad escape");
      }
    }
    return Value::text(out);
  }

  int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail("bad hex digit");
  }

  Value pid() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '>') ++pos_;
    if (pos_ >= s_.size()) fail("unterminated process id");
    ++pos_;
    auto id = ProcessId::parse(s_.substr(start, pos_ - start));
    if (!id) fail("malformed process id");
    return Value::pid(*id);
  }

  Value sequence(char open, char close, bool is_set) {
    expect(open);
    std::vector<Value> items;
    skip_ws();
    if (peek() == close) {
      take();
    } else {
      for (;;) {
        items.push_back(value());
        skip_ws();
        char c = take();
        if (c == close) break;
        if (c != ',') fail("expected ',' or close");
      }
    }
    return is_set ? Value::set(std::move(items)) : Value::tuple(std::move(items));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode(const Value& v) {
  std::string out;
  encode_to(v, out);
  return out;
}

Value decode(std::string_view text) { return Parser(text).parse(); }

std::ostream& operator<<(std::ostream& os, const Value& v) {
  return os << encode(v);
}

}  // namespace distcheck
