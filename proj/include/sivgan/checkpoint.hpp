// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sivgan {

/// One named float32 tensor in an archive.
struct CheckpointBlob {
    std::string name;
    std::vector<std::int64_t> dims;
    std::vector<float> data;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

/// Training snapshot: a JSON manifest plus raw little-endian float32 blobs.
/// Blobs are kept sorted by name, so save -> load -> save is byte-stable.
struct Checkpoint {
    int iteration = 0;
    std::uint64_t root_seed = 0;
    std::int64_t adam_g_t = 0, adam_d_t = 0;
    std::map<std::string, std::string> config;  // flat key=value snapshot
    std::vector<CheckpointBlob> blobs;

    void add(std::string name, std::vector<std::int64_t> dims, std::vector<float> data);
    const CheckpointBlob* find(const std::string& name) const;
    void sort_blobs();

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace sivgan
