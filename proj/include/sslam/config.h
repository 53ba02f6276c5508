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

// A small TOML subset: [section] headers, `key = value` lines and `#`
// comments. Values are booleans, integers, floats, double-quoted strings and
// flat arrays of numbers. Keys are addressed as "section.key".

#ifndef SSLAM_CONFIG_H_
#define SSLAM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace sslam::cfg {

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

class Table {
 public:
  static Table parse(const std::string& text, const std::string& source = "<string>");
  static Table load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  const std::map<std::string, Value>& values() const { return values_; }

  // Typed getters; integers widen to double. Throw DataError on a type clash.
  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Sections and keys in name order. Doubles use the shortest round-trip
  // form, so a dump parses back to the same values.
  std::string dump() const;

 private:
  std::map<std::string, Value> values_;
};

std::string format_double(double v);

}  // namespace sslam::cfg

#endif  // SSLAM_CONFIG_H_
