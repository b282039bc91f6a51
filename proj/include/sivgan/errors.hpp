// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sivgan {

/// Bad or inconsistent user-facing configuration (CLI exit 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable, corrupt, or incompatible checkpoint (CLI exit 3).
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or unusable metric plugin (CLI exit 4).
class PluginError : public std::runtime_error {
public:
    explicit PluginError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sivgan
