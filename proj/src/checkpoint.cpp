#include "dot/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace dot {

static_assert(std::endian::native == std::endian::little, "checkpoint format requires a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'O', 'T', 'C', 'K', 'P', 'T', '1'};

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

void write_bytes(std::FILE* f, const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("checkpoint: write failed");
}

void read_bytes(std::FILE* f, void* p, size_t n) {
    if (std::fread(p, 1, n, f) != n) throw std::runtime_error("truncated checkpoint");
}

void write_u64(std::FILE* f, std::uint64_t v) { write_bytes(f, &v, sizeof v); }
void write_u32(std::FILE* f, std::uint32_t v) { write_bytes(f, &v, sizeof v); }

std::uint64_t read_u64(std::FILE* f) {
    std::uint64_t v;
    read_bytes(f, &v, sizeof v);
    return v;
}
std::uint32_t read_u32(std::FILE* f) {
    std::uint32_t v;
    read_bytes(f, &v, sizeof v);
    return v;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& config_json, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    FileCloser closer{f};
    write_bytes(f, kMagic, sizeof kMagic);
    write_u64(f, config_json.size());
    write_bytes(f, config_json.data(), config_json.size());
    write_u64(f, params.params.size());
    for (const auto& [name, t] : params.params) {
        write_u64(f, name.size());
        write_bytes(f, name.data(), name.size());
        write_u32(f, std::uint32_t(t.ndim()));
        for (int d : t.shape) write_u32(f, std::uint32_t(d));
        write_bytes(f, t.data(), sizeof(float) * size_t(t.numel()));
    }
}

std::pair<ParamStore, std::string> load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    FileCloser closer{f};
    char magic[8];
    read_bytes(f, magic, sizeof magic);
    for (size_t i = 0; i < sizeof magic; ++i)
        if (magic[i] != kMagic[i]) throw std::runtime_error("bad magic");
    const std::uint64_t cfg_len = read_u64(f);
    if (cfg_len > (1ull << 30)) throw std::runtime_error("checkpoint: implausible config size");
    std::string config(cfg_len, '\0');
    read_bytes(f, config.data(), cfg_len);
    const std::uint64_t count = read_u64(f);
    ParamStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = read_u64(f);
        if (name_len > (1ull << 20)) throw std::runtime_error("checkpoint: implausible name size");
        std::string name(name_len, '\0');
        read_bytes(f, name.data(), name_len);
        const std::uint32_t ndim = read_u32(f);
        if (ndim > 8) throw std::runtime_error("checkpoint: implausible rank for " + name);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = int(read_u32(f));
        Tensor t(shape);
        read_bytes(f, t.data(), sizeof(float) * size_t(t.numel()));
        store.add(name, std::move(t));
    }
    return {std::move(store), std::move(config)};
}

void load_into(ParamStore& dst, const ParamStore& src) {
    for (auto& [name, t] : dst.params) {
        auto it = src.params.find(name);
        if (it == src.params.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
        if (!it->second.same_shape(t))
            throw std::runtime_error("checkpoint: tensor " + name + " has shape " + it->second.shape_str() +
                                     ", expected " + t.shape_str());
        t = it->second;
    }
}

}  // namespace dot
