// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace sivgan {

struct ConfigKeyInfo {
    const char* key;
    const char* def;
    const char* desc;
};

/// Every recognized key with its default value.
const std::vector<ConfigKeyInfo>& config_registry();

/// Flat key=value run configuration. Unknown keys are rejected; the
/// canonical echo (sorted key=value lines) reparses to an identical config.
class RunConfig {
public:
    RunConfig();  // defaults

    static RunConfig from_file(const std::string& path);
    static RunConfig parse_text(const std::string& text, const std::string& origin = "<inline>");

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string echo() const;
    const std::map<std::string, std::string>& map() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace sivgan
