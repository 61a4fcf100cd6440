#pragma once

// Minimal TOML reader covering the scenario schema: [section.sub] headers,
// bare keys, strings, integers, floats, booleans, and single-line arrays of
// scalars. Comments start with '#' outside strings. Keys are flattened to
// dotted paths ("types.1.arrival_rate"). Not supported: inline tables,
// multi-line arrays/strings, datetimes.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace fjlab::toml {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Value {
  enum class Kind { boolean, integer, floating, string, array };
  Kind kind = Kind::string;
  bool b = false;
  long long i = 0;
  double d = 0.0;
  std::string s;
  std::vector<Value> items;

  double as_double(const std::string& key) const {
    if (kind == Kind::floating) return d;
    if (kind == Kind::integer) return static_cast<double>(i);
    throw ParseError("key '" + key + "' must be a number");
  }
  long long as_int(const std::string& key) const {
    if (kind == Kind::integer) return i;
    throw ParseError("key '" + key + "' must be an integer");
  }
  bool as_bool(const std::string& key) const {
    if (kind == Kind::boolean) return b;
    throw ParseError("key '" + key + "' must be true or false");
  }
  const std::string& as_string(const std::string& key) const {
    if (kind == Kind::string) return s;
    throw ParseError("key '" + key + "' must be a string");
  }
  std::vector<double> as_double_list(const std::string& key) const {
    if (kind != Kind::array) throw ParseError("key '" + key + "' must be an array");
    std::vector<double> out;
    for (const Value& v : items) out.push_back(v.as_double(key));
    return out;
  }
  std::vector<long long> as_int_list(const std::string& key) const {
    if (kind != Kind::array) throw ParseError("key '" + key + "' must be an array");
    std::vector<long long> out;
    for (const Value& v : items) out.push_back(v.as_int(key));
    return out;
  }
  std::vector<std::string> as_string_list(const std::string& key) const {
    if (kind != Kind::array) throw ParseError("key '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const Value& v : items) out.push_back(v.as_string(key));
    return out;
  }

  std::string render() const {
    switch (kind) {
      case Kind::boolean: return b ? "true" : "false";
      case Kind::integer: return std::to_string(i);
      case Kind::floating: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        return buf;
      }
      case Kind::string: return "\"" + s + "\"";
      case Kind::array: {
        std::string out = "[";
        for (std::size_t n = 0; n < items.size(); ++n) {
          if (n > 0) out += ", ";
          out += items[n].render();
        }
        return out + "]";
      }
    }
    return "";
  }
};

class Table {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const Value& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ParseError("missing required key '" + key + "'");
    return it->second;
  }
  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  // Distinct integer section indices under a prefix: "types." yields {1, 2}
  // when keys "types.1.x" and "types.2.y" exist.
  std::vector<int> section_indices(const std::string& prefix) const {
    std::vector<int> out;
    for (const auto& [key, value] : values_) {
      if (key.rfind(prefix, 0) != 0) continue;
      const std::size_t dot = key.find('.', prefix.size());
      if (dot == std::string::npos) continue;
      const std::string index = key.substr(prefix.size(), dot - prefix.size());
      try {
        const int n = std::stoi(index);
        if (out.empty() || out.back() != n) out.push_back(n);
      } catch (...) {
        throw ParseError("section [" + prefix + index + "] must use an integer index");
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const std::map<std::string, Value>& entries() const { return values_; }

 private:
  std::map<std::string, Value> values_;
};

namespace detail {

inline void skip_space(const std::string& line, std::size_t& pos) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
}

inline Value parse_scalar(const std::string& text, int line_no) {
  if (text.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty value");
  Value v;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') {
      throw ParseError("line " + std::to_string(line_no) + ": unterminated string");
    }
    v.kind = Value::Kind::string;
    v.s = text.substr(1, text.size() - 2);
    return v;
  }
  if (text == "true" || text == "false") {
    v.kind = Value::Kind::boolean;
    v.b = text == "true";
    return v;
  }
  const bool looks_float = text.find_first_of(".eE") != std::string::npos ||
                           text == "inf" || text == "-inf" || text == "nan";
  try {
    std::size_t used = 0;
    if (looks_float) {
      v.kind = Value::Kind::floating;
      v.d = std::stod(text, &used);
    } else {
      v.kind = Value::Kind::integer;
      v.i = std::stoll(text, &used);
    }
    if (used != text.size()) throw std::invalid_argument("trailing");
  } catch (...) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse value '" + text + "'");
  }
  return v;
}

inline Value parse_value(const std::string& text, int line_no) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') {
      throw ParseError("line " + std::to_string(line_no) + ": arrays must close on one line");
    }
    Value v;
    v.kind = Value::Kind::array;
    std::string body = text.substr(1, text.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
      skip_space(body, pos);
      if (pos >= body.size()) break;
      std::size_t end = pos;
      bool in_string = false;
      while (end < body.size() && (in_string || body[end] != ',')) {
        if (body[end] == '"') in_string = !in_string;
        ++end;
      }
      std::string item = body.substr(pos, end - pos);
      while (!item.empty() && (item.back() == ' ' || item.back() == '\t')) item.pop_back();
      if (!item.empty()) v.items.push_back(parse_scalar(item, line_no));
      pos = end + 1;
    }
    return v;
  }
  return parse_scalar(text, line_no);
}

inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t pos = 0; pos < line.size(); ++pos) {
    if (line[pos] == '"') in_string = !in_string;
    if (line[pos] == '#' && !in_string) return line.substr(0, pos);
  }
  return line;
}

inline std::string trim(const std::string& text) {
  std::size_t a = 0, b = text.size();
  while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
  return text.substr(a, b - a);
}

}  // namespace detail

inline Table parse(const std::string& text) {
  Table table;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = detail::trim(detail::strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.has(full)) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
    }
    table.set(full, detail::parse_value(value, line_no));
    if (end == text.size()) break;
  }
  return table;
}

// "key=value" with the value in TOML syntax; replaces or adds the key.
inline void apply_override(Table& table, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ParseError("override must look like key=value, got '" + assignment + "'");
  }
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string value = detail::trim(assignment.substr(eq + 1));
  table.set(key, detail::parse_value(value, 0));
}

}  // namespace fjlab::toml
