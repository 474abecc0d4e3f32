#include "eclf/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace eclf {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'L', 'F', 'C', 'K', 'P', 'T'};

// dtype tags in the tensor table
constexpr std::uint8_t kF32 = 0;
constexpr std::uint8_t kF64 = 1;

constexpr std::uint8_t own_dtype() { return sizeof(real) == 4 ? kF32 : kF64; }

struct Writer {
    std::vector<unsigned char> buf;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
};

struct Reader {
    const unsigned char* p;
    const unsigned char* end;

    void raw(void* out, std::size_t n) {
        if (static_cast<std::size_t>(end - p) < n)
            throw std::runtime_error("checkpoint: truncated payload");
        std::memcpy(out, p, n);
        p += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (static_cast<std::uint64_t>(end - p) < n)
            throw std::runtime_error("checkpoint: truncated string");
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Writer w;
    w.raw(kMagic, 8);
    w.u32(Checkpoint::kVersion);

    w.u64(ckpt.iteration);
    for (auto s : ckpt.rng_state) w.u64(s);

    w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        w.str(name);
        w.u8(own_dtype());
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) w.u64(static_cast<std::uint64_t>(d));
        w.raw(t.data.data(), t.data.size() * sizeof(real));
    }

    w.u32(static_cast<std::uint32_t>(ckpt.opt_steps.size()));
    for (const auto& [name, steps] : ckpt.opt_steps) {
        w.str(name);
        w.u64(steps);
    }

    w.str(ckpt.config_text);
    w.str(ckpt.metric_log);
    w.f64(ckpt.best_score);
    w.u64(ckpt.best_iteration);
    w.u8(ckpt.has_best ? 1 : 0);
    w.u8(ckpt.diverged ? 1 : 0);

    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, w.buf.data() + 8, static_cast<uInt>(w.buf.size() - 8)));
    w.u32(crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path);

    const std::uint32_t stored_crc = [&] {
        std::uint32_t v;
        std::memcpy(&v, buf.data() + buf.size() - 4, 4);
        return v;
    }();
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, buf.data() + 8, static_cast<uInt>(buf.size() - 12)));
    if (crc != stored_crc)
        throw std::runtime_error("load_checkpoint: checksum mismatch (corrupt or truncated): " + path);

    Reader r{buf.data() + 8, buf.data() + buf.size() - 4};
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path);

    Checkpoint c;
    c.iteration = r.u64();
    for (auto& s : c.rng_state) s = r.u64();

    const std::uint32_t ntensors = r.u32();
    c.tensors.reserve(ntensors);
    for (std::uint32_t i = 0; i < ntensors; ++i) {
        const std::string name = r.str();
        const std::uint8_t dtype = r.u8();
        if (dtype != own_dtype())
            throw std::runtime_error("load_checkpoint: tensor '" + name +
                                     "' has a different float width than this build");
        const std::uint32_t ndim = r.u32();
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(r.u64());
        Tensor t(shape);
        r.raw(t.data.data(), t.data.size() * sizeof(real));
        c.tensors.emplace_back(name, std::move(t));
    }

    const std::uint32_t nsteps = r.u32();
    for (std::uint32_t i = 0; i < nsteps; ++i) {
        const std::string name = r.str();
        c.opt_steps.emplace_back(name, r.u64());
    }

    c.config_text = r.str();
    c.metric_log = r.str();
    c.best_score = r.f64();
    c.best_iteration = r.u64();
    c.has_best = r.u8() != 0;
    c.diverged = r.u8() != 0;
    return c;
}

}  // namespace eclf
