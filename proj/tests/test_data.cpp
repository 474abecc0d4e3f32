#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "eclf/image.hpp"
#include "eclf/synthleaf.hpp"
#include "eclf/util.hpp"

using namespace eclf;
namespace fs = std::filesystem;

namespace {

double mean_luminance(const Image& img) {
    double sum = 0.0;
    for (real v : img.px) sum += v;
    return sum / img.px.size();
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("eclf_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("render determinism and spotless identity") {
    FactorRecord f;
    f.base_hue = 0.7;
    f.spot_count = 4;
    f.spot_radius = 2.0;
    f.spot_darkness = 0.9;
    f.shape_eccentricity = 0.4;
    f.seed = 99;

    const Image a = render(f, 32);
    const Image b = render(f, 32);
    CHECK(a.px == b.px);  // byte-identical

    FactorRecord none = f;
    none.spot_count = 0;
    CHECK(spot_pixel_count(none, 32) == 0);
    CHECK(spot_pixel_count(f, 32) > 0);
}

TEST_CASE("darkness strictly lowers mean luminance") {
    FactorRecord dark;
    dark.base_hue = 0.3;
    dark.spot_count = 5;
    dark.spot_radius = 2.5;
    dark.spot_darkness = 1.0;
    dark.seed = 7;
    FactorRecord light = dark;
    light.spot_darkness = 0.0;
    // pixel-sum oracle on the rendered pair
    CHECK(mean_luminance(render(dark, 32)) < mean_luminance(render(light, 32)));
}

TEST_CASE("spot count monotonicity (property)") {
    Rng rng(314);
    for (int trial = 0; trial < 20; ++trial) {
        FactorRecord f;
        f.base_hue = rng.uniform(0.0, 1.0);
        f.spot_radius = rng.uniform(1.5, 3.0);
        f.spot_darkness = rng.uniform(0.5, 1.0);
        f.shape_eccentricity = rng.uniform(0.0, 0.9);
        f.seed = rng.next_u64();
        std::int64_t prev = 0;
        for (int count = 0; count <= 8; count += 2) {
            f.spot_count = count;
            const std::int64_t n = spot_pixel_count(f, 32);
            CHECK(n >= prev);
            prev = n;
        }
    }
}

TEST_CASE("out-of-range factors name the field") {
    FactorRecord f;
    f.base_hue = 1.5;
    try {
        render(f, 32);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("base_hue") != std::string::npos);
    }
    FactorRecord g;
    g.spot_count = -1;
    CHECK_THROWS(render(g, 32));
    CHECK_THROWS(render(FactorRecord{}, 8));  // size below minimum
}

TEST_CASE("generate_dataset counts, determinism, thresholds") {
    DatasetSpec spec;
    spec.preset = DataPreset::synth2;
    spec.train_per_class = 200;
    spec.val_per_class = 30;
    spec.test_per_class = 30;
    spec.master_seed = 5;

    const Dataset ds = generate_dataset(spec);
    CHECK(ds.train_idx.size() == 400);
    CHECK(ds.val_idx.size() == 60);  // 30 per class mirrors the protocol
    CHECK(ds.test_idx.size() == 60);
    CHECK(ds.num_classes() == 2);

    // splits are disjoint
    std::vector<int> seen(ds.samples.size(), 0);
    for (int i : ds.train_idx) seen[static_cast<std::size_t>(i)]++;
    for (int i : ds.val_idx) seen[static_cast<std::size_t>(i)]++;
    for (int i : ds.test_idx) seen[static_cast<std::size_t>(i)]++;
    for (int c : seen) CHECK(c == 1);

    const Dataset again = generate_dataset(spec);
    REQUIRE(again.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(again.samples[i].image.px == ds.samples[i].image.px);
        CHECK(again.samples[i].class_id == ds.samples[i].class_id);
    }

    // class regions honor the documented margin
    for (const auto& s : ds.samples) {
        REQUIRE(s.factors.has_value());
        const auto& f = *s.factors;
        const bool yellowed = f.base_hue > spec.hue_threshold;
        const bool spotted = f.spot_count > spec.spot_threshold;
        CHECK((s.class_id == 1) == (yellowed && spotted));
        CHECK(std::abs(f.base_hue - spec.hue_threshold) >= spec.hue_margin);
    }

    DatasetSpec bad = spec;
    bad.hue_margin = 0.6;  // empty class region
    CHECK_THROWS(generate_dataset(bad));
}

TEST_CASE("synth4 has four classes with exact counts") {
    DatasetSpec spec;
    spec.preset = DataPreset::synth4;
    spec.train_per_class = 5;
    spec.val_per_class = 1;
    spec.test_per_class = 1;
    const Dataset ds = generate_dataset(spec);
    CHECK(ds.num_classes() == 4);
    CHECK(ds.train_idx.size() == 20);
}

TEST_CASE("png round trip and resize") {
    const fs::path dir = temp_dir("png");
    FactorRecord f;
    f.base_hue = 0.5;
    f.spot_count = 3;
    f.seed = 11;
    const Image img = render(f, 32);
    const std::string path = (dir / "leaf.png").string();
    write_png(path, img);
    const Image back = read_png(path);
    REQUIRE(back.h == 32);
    REQUIRE(back.w == 32);
    // loader returns exactly the quantized bytes the writer emitted
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, static_cast<double>(img.px[i])));
        const double q = std::lround(v * 255.0) / 255.0;
        CHECK(back.px[i] == doctest::Approx(q).epsilon(1e-6));
    }

    const Image small = resize_bilinear(img, 16, 16);
    CHECK(small.h == 16);
    CHECK(small.w == 16);
    const Image same = resize_bilinear(img, 32, 32);
    CHECK(same.px == img.px);
}

TEST_CASE("png reader handles sub/up/paeth filters") {
    // hand-build a 3x3 RGB PNG using filter types 1, 2, 4
    const int w = 3, h = 3;
    unsigned char pixels[3][3][3];
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                pixels[y][x][c] = static_cast<unsigned char>(40 * y + 13 * x + 5 * c);

    auto paeth = [](int a, int b, int c) {
        const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        if (pb <= pc) return b;
        return c;
    };
    std::vector<unsigned char> raw;
    for (int y = 0; y < h; ++y) {
        const int filter = (y == 0) ? 1 : (y == 1 ? 2 : 4);
        raw.push_back(static_cast<unsigned char>(filter));
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int cur = pixels[y][x][c];
                const int left = x > 0 ? pixels[y][x - 1][c] : 0;
                const int above = y > 0 ? pixels[y - 1][x][c] : 0;
                const int diag = (x > 0 && y > 0) ? pixels[y - 1][x - 1][c] : 0;
                int enc = 0;
                if (filter == 1) enc = cur - left;
                else if (filter == 2) enc = cur - above;
                else enc = cur - paeth(left, above, diag);
                raw.push_back(static_cast<unsigned char>(enc & 0xff));
            }
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> z(zlen);
    REQUIRE(compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK);
    z.resize(zlen);

    std::vector<unsigned char> out{137, 80, 78, 71, 13, 10, 26, 10};
    auto put32 = [&out](std::uint32_t v) {
        out.push_back(static_cast<unsigned char>(v >> 24));
        out.push_back(static_cast<unsigned char>(v >> 16));
        out.push_back(static_cast<unsigned char>(v >> 8));
        out.push_back(static_cast<unsigned char>(v));
    };
    auto chunk = [&](const char* type, const std::vector<unsigned char>& data) {
        put32(static_cast<std::uint32_t>(data.size()));
        const std::size_t start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        put32(static_cast<std::uint32_t>(
            crc32(0L, out.data() + start, static_cast<uInt>(4 + data.size()))));
    };
    std::vector<unsigned char> ihdr;
    ihdr.insert(ihdr.end(), {0, 0, 0, 3, 0, 0, 0, 3});  // 3x3
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    chunk("IHDR", ihdr);
    chunk("IDAT", z);
    chunk("IEND", {});

    const fs::path dir = temp_dir("pngfilters");
    const std::string path = (dir / "filtered.png").string();
    std::ofstream fo(path, std::ios::binary);
    fo.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    fo.close();

    const Image img = read_png(path);
    REQUIRE(img.h == h);
    REQUIRE(img.w == w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(img.at(y, x, c) == doctest::Approx(pixels[y][x][c] / 255.0).epsilon(1e-6));
}

TEST_CASE("ingest_folder splits, errors, determinism") {
    const fs::path root = temp_dir("ingest");
    for (const char* cls : {"healthy", "diseased"}) {
        fs::create_directories(root / cls);
        for (int i = 0; i < 20; ++i) {
            FactorRecord f;
            f.base_hue = (cls[0] == 'h') ? 0.2 : 0.8;
            f.spot_count = (cls[0] == 'h') ? 0 : 6;
            f.seed = static_cast<std::uint64_t>(i) * 7 + (cls[0] == 'h' ? 0 : 1000);
            char name[32];
            std::snprintf(name, sizeof(name), "img_%03d.png", i);
            write_png((root / cls / name).string(), render(f, 20));
        }
    }

    DatasetSpec spec;
    spec.preset = DataPreset::folder;
    spec.folder_root = root.string();
    spec.image_size = 16;
    spec.val_per_class = 5;
    spec.test_per_class = 5;
    spec.master_seed = 77;

    const Dataset ds = ingest_folder(root.string(), spec);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.train_idx.size() == 20);  // remainder after 5 val + 5 test per class
    CHECK(ds.val_idx.size() == 10);
    CHECK(ds.test_idx.size() == 10);
    CHECK(ds.samples[0].image.h == 16);

    const Dataset again = ingest_folder(root.string(), spec);
    CHECK(again.train_idx == ds.train_idx);
    CHECK(again.val_idx == ds.val_idx);
    CHECK(again.test_idx == ds.test_idx);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        CHECK(again.samples[i].image.px == ds.samples[i].image.px);

    // empty class directory names the class
    fs::create_directories(root / "zz_empty");
    try {
        ingest_folder(root.string(), spec);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("zz_empty") != std::string::npos);
    }
    fs::remove_all(root / "zz_empty");

    // too few images for the requested split
    DatasetSpec greedy = spec;
    greedy.val_per_class = 10;
    greedy.test_per_class = 10;
    CHECK_THROWS(ingest_folder(root.string(), greedy));
}

TEST_CASE("dataset save/load round trip") {
    DatasetSpec spec;
    spec.preset = DataPreset::synth2;
    spec.train_per_class = 4;
    spec.val_per_class = 2;
    spec.test_per_class = 2;
    spec.image_size = 24;
    const Dataset ds = generate_dataset(spec);

    const fs::path dir = temp_dir("save");
    save_dataset(ds, dir.string());
    const Dataset back = load_dataset(dir.string());
    CHECK(back.class_names == ds.class_names);
    CHECK(back.image_size == ds.image_size);
    REQUIRE(back.samples.size() == ds.samples.size());
    CHECK(back.train_idx.size() == ds.train_idx.size());
    const auto& a = ds.samples[static_cast<std::size_t>(ds.train_idx[0])];
    const auto& b = back.samples[static_cast<std::size_t>(back.train_idx[0])];
    CHECK(b.class_id == a.class_id);
    REQUIRE(b.factors.has_value());
    CHECK(b.factors->base_hue == doctest::Approx(a.factors->base_hue));
    CHECK(b.factors->seed == a.factors->seed);
    // pixels survive up to the 8-bit PNG quantization
    for (std::size_t i = 0; i < a.image.px.size(); ++i)
        CHECK(std::abs(a.image.px[i] - b.image.px[i]) <= real(0.5 / 255.0) + real(1e-6));
}

TEST_CASE("hstack frames") {
    Image a(4, 4), b(4, 4);
    a.px.assign(a.px.size(), real(1));
    const Image strip = hstack_frames({a, b});
    CHECK(strip.h == 4);
    CHECK(strip.w == 4 + 2 + 4);
    CHECK(strip.at(0, 0, 0) == real(1));
    CHECK(strip.at(0, 5, 0) == real(0.5));  // separator
    CHECK(strip.at(0, 6, 0) == real(0));
}
