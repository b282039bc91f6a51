// SPDX-License-Identifier: Apache-2.0
#include "sivgan/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>

#include "sivgan/errors.hpp"

namespace sivgan {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'V', 'G', 'A', 'N', '1', '\n'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_all(std::FILE* f, const void* p, size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n) throw CheckpointError("write failed: " + path);
}

void read_all(std::FILE* f, void* p, size_t n, const std::string& path) {
    if (std::fread(p, 1, n, f) != n) throw CheckpointError("truncated checkpoint: " + path);
}

}  // namespace

void Checkpoint::add(std::string name, std::vector<std::int64_t> dims, std::vector<float> data) {
    CheckpointBlob b{std::move(name), std::move(dims), std::move(data)};
    if (b.numel() != std::int64_t(b.data.size()))
        throw CheckpointError("blob '" + b.name + "' dims do not match data size");
    blobs.push_back(std::move(b));
}

const CheckpointBlob* Checkpoint::find(const std::string& name) const {
    for (const auto& b : blobs)
        if (b.name == name) return &b;
    return nullptr;
}

void Checkpoint::sort_blobs() {
    std::sort(blobs.begin(), blobs.end(),
              [](const CheckpointBlob& a, const CheckpointBlob& b) { return a.name < b.name; });
}

void Checkpoint::save(const std::string& path) const {
    static_assert(sizeof(float) == 4);
    nlohmann::json manifest;
    manifest["format"] = 1;
    manifest["iteration"] = iteration;
    manifest["root_seed"] = root_seed;
    manifest["adam"] = {{"g_t", adam_g_t}, {"d_t", adam_d_t}};
    manifest["config"] = config;
    auto& tensors = manifest["tensors"] = nlohmann::json::array();
    std::vector<const CheckpointBlob*> order;
    for (const auto& b : blobs) order.push_back(&b);
    std::sort(order.begin(), order.end(),
              [](const CheckpointBlob* a, const CheckpointBlob* b) { return a->name < b->name; });
    for (const auto* b : order) tensors.push_back({{"dims", b->dims}, {"name", b->name}});
    const std::string text = manifest.dump();

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw CheckpointError("cannot open for writing: " + path);
    write_all(f.get(), kMagic, sizeof(kMagic), path);
    const std::uint64_t len = text.size();
    unsigned char len_le[8];
    for (int i = 0; i < 8; ++i) len_le[i] = (unsigned char)(len >> (8 * i));
    write_all(f.get(), len_le, 8, path);
    write_all(f.get(), text.data(), text.size(), path);
    for (const auto* b : order)
        write_all(f.get(), b->data.data(), b->data.size() * sizeof(float), path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    read_all(f.get(), magic, 8, path);
    if (std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("bad magic; not a checkpoint: " + path);
    unsigned char len_le[8];
    read_all(f.get(), len_le, 8, path);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= std::uint64_t(len_le[i]) << (8 * i);
    if (len > (1u << 30)) throw CheckpointError("implausible manifest size: " + path);
    std::string text(len, '\0');
    read_all(f.get(), text.data(), len, path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt manifest in " + path + ": " + e.what());
    }
    Checkpoint ck;
    try {
        if (manifest.at("format").get<int>() != 1)
            throw CheckpointError("unsupported checkpoint format in " + path);
        ck.iteration = manifest.at("iteration").get<int>();
        ck.root_seed = manifest.at("root_seed").get<std::uint64_t>();
        ck.adam_g_t = manifest.at("adam").at("g_t").get<std::int64_t>();
        ck.adam_d_t = manifest.at("adam").at("d_t").get<std::int64_t>();
        if (manifest.contains("config"))
            ck.config = manifest.at("config").get<std::map<std::string, std::string>>();
        for (const auto& t : manifest.at("tensors")) {
            CheckpointBlob b;
            b.name = t.at("name").get<std::string>();
            b.dims = t.at("dims").get<std::vector<std::int64_t>>();
            const auto n = b.numel();
            if (n < 0 || n > (std::int64_t(1) << 31))
                throw CheckpointError("implausible tensor size for '" + b.name + "' in " + path);
            b.data.resize(size_t(n));
            read_all(f.get(), b.data.data(), size_t(n) * sizeof(float), path);
            ck.blobs.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt manifest in " + path + ": " + e.what());
    }
    // no trailing garbage
    char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1)
        throw CheckpointError("trailing bytes after blobs: " + path);
    return ck;
}

}  // namespace sivgan
