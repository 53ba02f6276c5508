// Copyright 2026 The SSLAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sslam/config.h"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "sslam/errors.h"
#include "sslam/le_io.h"

namespace sslam::cfg {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

bool parse_number(const std::string& s, Value& out) {
  const bool is_float = s.find_first_of(".eEn") != std::string::npos;
  if (!is_float) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return false;
    out = v;
    return true;
  }
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  out = v;
  return true;
}

Value parse_value(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) throw DataError(where + ": missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw DataError(where + ": unterminated string");
    std::string out;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        ++i;
        out.push_back(s[i] == 'n' ? '\n' : s[i]);
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw DataError(where + ": unterminated array");
    std::vector<double> items;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      Value v;
      if (!parse_number(item, v)) throw DataError(where + ": bad array element '" + item + "'");
      items.push_back(std::holds_alternative<std::int64_t>(v)
                          ? static_cast<double>(std::get<std::int64_t>(v))
                          : std::get<double>(v));
    }
    return items;
  }
  Value v;
  if (!parse_number(s, v)) throw DataError(where + ": cannot parse value '" + s + "'");
  return v;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string out(buf, p);
  if (std::isfinite(v) && out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

Table Table::parse(const std::string& text, const std::string& source) {
  Table t;
  std::string section;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw DataError(where + ": bad section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw DataError(where + ": bad key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (t.has(full)) throw DataError(where + ": duplicate key '" + full + "'");
    t.values_[full] = parse_value(line.substr(eq + 1), where);
  }
  return t;
}

Table Table::load(const std::filesystem::path& path) {
  const std::vector<char> bytes = le::read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()), path.string());
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const bool* b = std::get_if<bool>(&it->second)) return *b;
  throw DataError("config key '" + key + "' must be a boolean");
}

std::int64_t Table::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (const double* d = std::get_if<double>(&it->second)) {
    if (*d == std::floor(*d) && std::abs(*d) < 9e15) return static_cast<std::int64_t>(*d);
  }
  throw DataError("config key '" + key + "' must be an integer");
}

double Table::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw DataError("config key '" + key + "' must be a number");
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw DataError("config key '" + key + "' must be a string");
}

std::vector<double> Table::get_list(const std::string& key,
                                    const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* l = std::get_if<std::vector<double>>(&it->second)) return *l;
  throw DataError("config key '" + key + "' must be an array of numbers");
}

std::string Table::dump() const {
  std::map<std::string, std::vector<std::pair<std::string, const Value*>>> sections;
  for (const auto& [full, v] : values_) {
    const size_t dot = full.find('.');
    const std::string sec = dot == std::string::npos ? "" : full.substr(0, dot);
    const std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
    sections[sec].emplace_back(key, &v);
  }
  std::string out;
  for (const auto& [sec, entries] : sections) {
    if (!sec.empty()) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
    }
    for (const auto& [key, v] : entries) {
      out += key + " = ";
      if (const bool* b = std::get_if<bool>(v)) {
        out += *b ? "true" : "false";
      } else if (const auto* i = std::get_if<std::int64_t>(v)) {
        out += std::to_string(*i);
      } else if (const double* d = std::get_if<double>(v)) {
        out += format_double(*d);
      } else if (const auto* s = std::get_if<std::string>(v)) {
        out += quote(*s);
      } else {
        const auto& l = std::get<std::vector<double>>(*v);
        out += "[";
        for (size_t k = 0; k < l.size(); ++k) out += (k ? ", " : "") + format_double(l[k]);
        out += "]";
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace sslam::cfg
