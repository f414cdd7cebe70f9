// Copyright 2026 The AFK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFK_TOML_HPP_
#define AFK_TOML_HPP_

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "afk/error.hpp"

namespace afk {

// TOML subset: [section] headers, key = value lines, # comments. Values are
// strings, integers, floats, booleans, or flat arrays of those.

struct TomlValue {
  enum class Kind { kString, kInt, kFloat, kBool, kArray };
  Kind kind = Kind::kString;
  std::string str;
  std::int64_t integer = 0;
  double number = 0.0;
  bool boolean = false;
  std::vector<TomlValue> items;

  double as_number() const {
    if (kind == Kind::kInt) return static_cast<double>(integer);
    if (kind == Kind::kFloat) return number;
    throw ConfigError("config value is not numeric");
  }
};

class TomlTable {
 public:
  void set(const std::string& section, const std::string& key, TomlValue value) {
    sections_[section][key] = std::move(value);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  const TomlValue& get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
      throw ConfigError("missing config key [" + section + "] " + key);
    return s->second.at(key);
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    if (!has(section, key)) return fallback;
    const TomlValue& v = get(section, key);
    if (v.kind != TomlValue::Kind::kString)
      throw ConfigError("[" + section + "] " + key + " must be a string");
    return v.str;
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    if (!has(section, key)) return fallback;
    const TomlValue& v = get(section, key);
    if (v.kind != TomlValue::Kind::kInt)
      throw ConfigError("[" + section + "] " + key + " must be an integer");
    return v.integer;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    if (!has(section, key)) return fallback;
    return get(section, key).as_number();
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    if (!has(section, key)) return fallback;
    const TomlValue& v = get(section, key);
    if (v.kind != TomlValue::Kind::kBool)
      throw ConfigError("[" + section + "] " + key + " must be a boolean");
    return v.boolean;
  }

  std::vector<double> get_number_array(const std::string& section,
                                       const std::string& key,
                                       const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    const TomlValue& v = get(section, key);
    if (v.kind != TomlValue::Kind::kArray)
      throw ConfigError("[" + section + "] " + key + " must be an array");
    std::vector<double> out;
    for (const TomlValue& item : v.items) out.push_back(item.as_number());
    return out;
  }

  const std::map<std::string, std::map<std::string, TomlValue>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, TomlValue>> sections_;
};

namespace toml_detail {

inline std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Removes a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline TomlValue parse_scalar(const std::string& raw, int line_no) {
  const std::string text = strip(raw);
  if (text.empty())
    throw ConfigError("line " + std::to_string(line_no) + ": empty value");
  TomlValue v;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    v.kind = TomlValue::Kind::kString;
    v.str = text.substr(1, text.size() - 2);
    return v;
  }
  if (text == "true" || text == "false") {
    v.kind = TomlValue::Kind::kBool;
    v.boolean = text == "true";
    return v;
  }
  const bool looks_float = text.find_first_of(".eE") != std::string::npos;
  std::size_t used = 0;
  try {
    if (looks_float) {
      v.kind = TomlValue::Kind::kFloat;
      v.number = std::stod(text, &used);
    } else {
      v.kind = TomlValue::Kind::kInt;
      v.integer = std::stoll(text, &used, 10);
    }
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad value '" + text + "'");
  }
  if (used != text.size())
    throw ConfigError("line " + std::to_string(line_no) + ": trailing junk in '" +
                      text + "'");
  return v;
}

inline TomlValue parse_value(const std::string& raw, int line_no) {
  const std::string text = strip(raw);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
    TomlValue v;
    v.kind = TomlValue::Kind::kArray;
    const std::string inner = text.substr(1, text.size() - 2);
    std::string item;
    bool quoted = false;
    for (char c : inner) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        v.items.push_back(parse_scalar(item, line_no));
        item.clear();
      } else {
        item.push_back(c);
      }
    }
    if (!strip(item).empty()) v.items.push_back(parse_scalar(item, line_no));
    return v;
  }
  return parse_scalar(text, line_no);
}

}  // namespace toml_detail

inline TomlTable parse_toml(std::istream& in) {
  using namespace toml_detail;
  TomlTable table;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = strip(strip_comment(line));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = strip(text.substr(1, text.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(text.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    table.set(section, key, parse_value(text.substr(eq + 1), line_no));
  }
  return table;
}

inline TomlTable load_toml(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return parse_toml(in);
}

}  // namespace afk

#endif  // AFK_TOML_HPP_
