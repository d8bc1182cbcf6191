#include "emw/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace emw {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw std::runtime_error(
                "checkpoint: truncated file, expected " + std::to_string(pos + n) +
                " bytes, file has " + std::to_string(buf.size()));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors) {
    std::string out;
    out += "EMWT";
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        std::size_t count = 1;
        for (int d : t.shape) {
            if (d <= 0) throw std::invalid_argument("checkpoint: non-positive dimension");
            put_u32(out, static_cast<std::uint32_t>(d));
            count *= static_cast<std::size_t>(d);
        }
        if (count != t.values.size())
            throw std::invalid_argument("checkpoint: payload does not match shape for " +
                                        t.name);
        for (double v : t.values) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    Reader rd{buf};
    if (rd.bytes(4) != "EMWT")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t count = rd.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const std::uint32_t name_len = rd.u32();
        t.name = rd.bytes(name_len);
        const std::uint32_t rank = rd.u32();
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = rd.u32();
            if (dim == 0) throw std::runtime_error("checkpoint: zero dimension in " + t.name);
            t.shape.push_back(static_cast<int>(dim));
            n *= dim;
        }
        t.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) t.values[j] = rd.f64();
        tensors.push_back(std::move(t));
    }
    if (rd.pos != buf.size())
        throw std::runtime_error("checkpoint: trailing bytes in " + path);
    return tensors;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name) {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("checkpoint: missing tensor " + name);
}

}  // namespace emw
