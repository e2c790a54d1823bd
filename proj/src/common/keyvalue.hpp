/*
 * Copyright 2026 The msdg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace msdg {

/// Plain-text `key=value` configuration, one key per line. Blank lines and
/// lines starting with '#' are ignored. Readers consume keys with take_*;
/// finish() rejects anything left over.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& source = "<string>");
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string take_string(const std::string& key, const std::string& fallback);
    double take_double(const std::string& key, double fallback);
    std::uint64_t take_u64(const std::string& key, std::uint64_t fallback);
    bool take_bool(const std::string& key, bool fallback);

    /// Throws ConfigError naming every key no reader consumed.
    void finish() const;

private:
    const std::string* take(const std::string& key);

    std::string source_;
    std::map<std::string, std::string> entries_;
    std::set<std::string> consumed_;
};

}  // namespace msdg
