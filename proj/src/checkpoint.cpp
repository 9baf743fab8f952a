#include "davrp/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace davrp {

namespace {

constexpr char kMagic[] = "DAVRPCKPT";
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

bool file_exists(const std::string& path) {
    std::ifstream f(path);
    return f.good();
}

void save_tensors(const std::string& path, const std::vector<const ta::Param<float>*>& tensors,
                  const std::map<std::string, std::string>& meta) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
        os.write(kMagic, sizeof(kMagic) - 1);
        put_u32(os, kVersion);
        put_u32(os, static_cast<std::uint32_t>(tensors.size()));
        for (const auto* p : tensors) {
            put_u32(os, static_cast<std::uint32_t>(p->name.size()));
            os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            put_u32(os, static_cast<std::uint32_t>(p->shape.size()));
            std::size_t count = 1;
            for (int d : p->shape) {
                put_u32(os, static_cast<std::uint32_t>(d));
                count *= static_cast<std::size_t>(d);
            }
            if (count != p->value.size())
                throw std::logic_error("checkpoint: shape/data mismatch for " + p->name);
            static_assert(sizeof(float) == 4);
            os.write(reinterpret_cast<const char*>(p->value.data()),
                     static_cast<std::streamsize>(count * 4));
        }
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    {
        std::ofstream ms(tmp + ".meta", std::ios::trunc);
        for (const auto& [k, v] : meta) ms << k << " = " << v << "\n";
        if (!ms) throw std::runtime_error("checkpoint: meta write failed");
    }
    if (std::rename((tmp + ".meta").c_str(), (path + ".meta").c_str()) != 0)
        throw std::runtime_error("checkpoint: rename of meta sidecar failed");
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("checkpoint: rename failed");
}

void load_tensors(const std::string& path, const std::vector<ta::Param<float>*>& tensors,
                  std::map<std::string, std::string>* meta_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[sizeof(kMagic) - 1];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, sizeof(magic)) != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (get_u32(is) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    const std::uint32_t count = get_u32(is);

    struct Entry {
        std::vector<int> shape;
        std::vector<float> data;
    };
    std::unordered_map<std::string, Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        Entry e;
        const std::uint32_t rank = get_u32(is);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            e.shape.push_back(static_cast<int>(get_u32(is)));
            total *= static_cast<std::size_t>(e.shape.back());
        }
        e.data.resize(total);
        is.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(total * 4));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
        entries.emplace(std::move(name), std::move(e));
    }

    for (auto* p : tensors) {
        auto it = entries.find(p->name);
        if (it == entries.end())
            throw std::runtime_error("checkpoint: missing tensor " + p->name);
        if (it->second.shape != p->shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
        p->value = it->second.data;
    }

    if (meta_out) *meta_out = read_meta_file(path + ".meta");
}

std::map<std::string, std::string> read_meta_file(const std::string& path) {
    std::map<std::string, std::string> meta;
    std::ifstream ms(path);
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(ms, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return meta;
}

}  // namespace davrp
