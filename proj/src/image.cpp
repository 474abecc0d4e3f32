#include "eclf/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace eclf {

Tensor Image::to_tensor() const {
    Tensor t({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) t[(static_cast<std::int64_t>(c) * h + y) * w + x] = at(y, x, c);
    return t;
}

Image Image::from_tensor(const Tensor& t) {
    std::vector<int> s = t.shape;
    if (s.size() == 4) {
        require(s[0] == 1, "from_tensor expects a single image");
        s.erase(s.begin());
    }
    require(s.size() == 3 && s[0] == 3, "from_tensor expects [3,h,w]");
    Image img(s[1], s[2]);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                img.at(y, x, c) = t[(static_cast<std::int64_t>(c) * img.h + y) * img.w + x];
    return img;
}

namespace {

void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

std::uint32_t get_u32_be(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size())));
    put_u32_be(out, crc);
}

std::vector<unsigned char> zlib_deflate(const std::vector<unsigned char>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<unsigned char> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    out.resize(bound);
    return out;
}

std::vector<unsigned char> zlib_inflate(const unsigned char* data, std::size_t size,
                                        std::size_t expected) {
    std::vector<unsigned char> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &out_len, data, static_cast<uLong>(size));
    if (rc != Z_OK || out_len != expected) throw std::runtime_error("png: inflate failed");
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void write_png(const std::string& path, const Image& img) {
    require(img.h > 0 && img.w > 0, "write_png: empty image");
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(img.h) * (1 + static_cast<std::size_t>(img.w) * 3));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = static_cast<double>(img.at(y, x, c));
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
        }
    }

    std::vector<unsigned char> out(kPngSig, kPngSig + 8);
    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_deflate(raw));
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

Image read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw std::runtime_error("read_png: not a PNG file: " + path);

    std::uint32_t w = 0, h = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<unsigned char> idat;
    std::size_t pos = 8;
    bool saw_iend = false;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = get_u32_be(&buf[pos]);
        if (pos + 12 + len > buf.size()) throw std::runtime_error("read_png: truncated chunk in " + path);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const unsigned char* data = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            require(len == 13, "read_png: bad IHDR in " + path);
            w = get_u32_be(data);
            h = get_u32_be(data + 4);
            bit_depth = data[8];
            color_type = data[9];
            interlace = data[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_iend || w == 0 || h == 0) throw std::runtime_error("read_png: malformed file: " + path);
    if (bit_depth != 8 || interlace != 0)
        throw std::runtime_error("read_png: only 8-bit non-interlaced PNGs supported: " + path);
    int channels = 0;
    switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default: throw std::runtime_error("read_png: unsupported color type in " + path);
    }

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    const std::size_t expected = static_cast<std::size_t>(h) * (stride + 1);
    std::vector<unsigned char> raw = zlib_inflate(idat.data(), idat.size(), expected);

    // undo per-scanline filters in place
    std::vector<unsigned char> prev(stride, 0);
    Image img(static_cast<int>(h), static_cast<int>(w));
    for (std::uint32_t y = 0; y < h; ++y) {
        unsigned char* row = &raw[y * (stride + 1)];
        const int filter = row[0];
        unsigned char* px = row + 1;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? px[i - channels] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int v = px[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("read_png: bad filter byte in " + path);
            }
            px[i] = static_cast<unsigned char>(v & 0xff);
        }
        std::memcpy(prev.data(), px, stride);
        for (std::uint32_t x = 0; x < w; ++x) {
            const unsigned char* p = px + static_cast<std::size_t>(x) * channels;
            real r, g, bl;
            if (channels <= 2) {
                r = g = bl = static_cast<real>(p[0] / 255.0);
            } else {
                r = static_cast<real>(p[0] / 255.0);
                g = static_cast<real>(p[1] / 255.0);
                bl = static_cast<real>(p[2] / 255.0);
            }
            img.at(static_cast<int>(y), static_cast<int>(x), 0) = r;
            img.at(static_cast<int>(y), static_cast<int>(x), 1) = g;
            img.at(static_cast<int>(y), static_cast<int>(x), 2) = bl;
        }
    }
    return img;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    require(out_h > 0 && out_w > 0, "resize_bilinear: bad target size");
    if (src.h == out_h && src.w == out_w) return src;
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::max(0, std::min(src.h - 1, static_cast<int>(std::floor(fy))));
        const int y1 = std::min(src.h - 1, y0 + 1);
        const double wy = std::max(0.0, std::min(1.0, fy - y0));
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::max(0, std::min(src.w - 1, static_cast<int>(std::floor(fx))));
            const int x1 = std::min(src.w - 1, x0 + 1);
            const double wx = std::max(0.0, std::min(1.0, fx - x0));
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                dst.at(y, x, c) = static_cast<real>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

Image hstack_frames(const std::vector<Image>& frames) {
    require(!frames.empty(), "hstack_frames: no frames");
    const int h = frames[0].h;
    const int sep = 2;
    int w = -sep;
    for (const auto& f : frames) {
        require(f.h == h, "hstack_frames: frame heights differ");
        w += f.w + sep;
    }
    Image out(h, w);
    for (auto& v : out.px) v = real(0.5);
    int xoff = 0;
    for (const auto& f : frames) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < f.w; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, xoff + x, c) = f.at(y, x, c);
        xoff += f.w + sep;
    }
    return out;
}

}  // namespace eclf
