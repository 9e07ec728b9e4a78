// tfsep/config.hpp

// Copyright 2026  tfsep authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TFSEP_CONFIG_H_
#define TFSEP_CONFIG_H_

#include <map>
#include <string>
#include <vector>

namespace tfsep {

// Flat, typed-on-read key/value configuration.  Every key must exist in the
// built-in schema; unknown keys are rejected so typos fail loudly instead of
// silently training the wrong model.
class RunConfig {
 public:
  // All keys at their default values.
  static RunConfig defaults();
  // key -> default value, in schema order.
  static const std::vector<std::pair<std::string, std::string>>& schema();

  void set(const std::string& key, const std::string& value);
  // Lines of "key = value"; '#' starts a comment; blank lines skipped.
  void load_file(const std::string& path);
  // Apply "key=value" strings (CLI --set options).
  void apply_overrides(const std::vector<std::string>& overrides);

  const std::string& gets(const std::string& key) const;
  int64_t geti(const std::string& key) const;
  double getf(const std::string& key) const;
  bool getb(const std::string& key) const;

  // Sorted "key = value" lines; parse() restores them exactly.
  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  void save_file(const std::string& path) const;

  bool operator==(const RunConfig& other) const {
    return values_ == other.values_;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tfsep

#endif  // TFSEP_CONFIG_H_
