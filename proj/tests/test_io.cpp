// Image, map and Beltrami-field files, grid rendering, traces and config files.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <png.h>

#include "qcreg/config.hpp"
#include "qcreg/errors.hpp"
#include "qcreg/io.hpp"
#include "qcreg/synthetic.hpp"

using namespace qcreg;
namespace fs = std::filesystem;

namespace {

fs::path temp(const std::string &name) { return fs::temp_directory_path() / ("qcreg_test_" + name); }

std::vector<std::uint8_t> bytes_of(const std::string &s) { return {s.begin(), s.end()}; }

template <class F>
FormatErrorKind kind_of(F &&f) {
    try {
        f();
    } catch (const FormatError &e) {
        return e.kind();
    }
    FAIL("expected FormatError");
    return FormatErrorKind::Unsupported;
}

QCMap wavy_map(int h, int w) {
    QCMap map = identity_map(build_grid_mesh(h, w));
    for (auto &p : map.positions) p += Vec2{0.3 * std::sin(p.y), -0.2 * std::cos(p.x)};
    return map;
}

} // namespace

TEST_CASE("PGM decoding") {
    std::string pgm = "P5\n# comment\n2 1\n255\n";
    pgm += static_cast<char>(128);
    pgm += static_cast<char>(255);
    const Image img = decode_image(bytes_of(pgm));
    CHECK(img.height == 1);
    CHECK(img.width == 2);
    CHECK(img.pixels[0] == doctest::Approx(0.50196).epsilon(1e-5));
    CHECK(img.pixels[1] == 1.0);

    std::string p15 = "P5 1 1 15\n";
    p15 += static_cast<char>(5);
    CHECK(decode_image(bytes_of(p15)).pixels[0] == doctest::Approx(5.0 / 15.0));

    std::string p16 = "P5 1 1 1000\n";
    p16 += static_cast<char>(1);
    p16 += static_cast<char>(244);
    CHECK(decode_image(bytes_of(p16)).pixels[0] == doctest::Approx(0.5));

    CHECK(kind_of([] { decode_image(bytes_of("P5 2 2 255\nabc")); }) == FormatErrorKind::Truncated);
    CHECK(kind_of([] { decode_image(bytes_of("P5 1 1 255\nab")); }) == FormatErrorKind::TrailingBytes);
    CHECK(kind_of([] { decode_image(bytes_of("P5 0 1 255\n")); }) == FormatErrorKind::ZeroDimension);
    CHECK(kind_of([] { decode_image(bytes_of("P5 1 1 70000\na")); }) == FormatErrorKind::BadHeader);
    CHECK(kind_of([] { decode_image(bytes_of("P2 1 1 255\n1")); }) == FormatErrorKind::Unsupported);
    CHECK(kind_of([] { decode_image(bytes_of("GIF89a")); }) == FormatErrorKind::Unsupported);
}

TEST_CASE("image write/read round trip is idempotent") {
    const Image src = smooth_pattern(23, 31, 0.4);
    for (const char *ext : {".png", ".pgm"}) {
        const auto path = temp(std::string("roundtrip") + ext);
        write_image(path, src);
        const Image once = read_image(path);
        CHECK(once.height == 23);
        CHECK(once.width == 31);
        for (std::size_t k = 0; k < src.size(); ++k) CHECK(std::abs(once.pixels[k] - src.pixels[k]) <= 0.5 / 255 + 1e-12);
        write_image(path, once);
        CHECK(read_image(path).pixels == once.pixels);
        fs::remove(path);
    }
    CHECK(kind_of([&] { write_image(temp("x.bmp"), src); }) == FormatErrorKind::Unsupported);
}

TEST_CASE("colour PNG becomes luminance") {
    const auto path = temp("colour.png");
    std::vector<std::uint8_t> rgb{255, 255, 255, 0, 0, 0, 128, 128, 128, 255, 0, 0};
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = 4;
    img.height = 1;
    img.format = PNG_FORMAT_RGB;
    REQUIRE(png_image_write_to_file(&img, path.string().c_str(), 0, rgb.data(), 0, nullptr));
    const Image g = read_image(path);
    CHECK(g.width == 4);
    CHECK(g.pixels[0] == 1.0);
    CHECK(g.pixels[1] == 0.0);
    CHECK(std::abs(g.pixels[2] - 128.0 / 255) <= 1.0 / 255);
    // libpng converts through linear light: Y = 0.2126 for pure red, then sRGB-encoded.
    const double y = 0.2126;
    const double srgb = 1.055 * std::pow(y, 1.0 / 2.4) - 0.055;
    CHECK(std::abs(g.pixels[3] - srgb) <= 2.0 / 255);
    fs::remove(path);
}

TEST_CASE("QCM1 round trip and errors") {
    const QCMap map = wavy_map(7, 5);
    const auto path = temp("map.qcm");
    write_map(path, map);
    const QCMap back = read_map(path);
    CHECK(back.height == 7);
    CHECK(back.width == 5);
    const auto bytes = serialize_map(map);
    CHECK(bytes.size() == 12 + 8 * 8 * 6);
    CHECK(serialize_map(back) == bytes);
    for (std::size_t v = 0; v < map.positions.size(); ++v) CHECK(back.positions[v].x == static_cast<float>(map.positions[v].x));
    fs::remove(path);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK(kind_of([&] { parse_map(bad); }) == FormatErrorKind::BadMagic);
    const std::vector<std::uint8_t> short_payload(bytes.begin(), bytes.end() - 8);
    try {
        parse_map(short_payload);
        FAIL("expected FormatError");
    } catch (const FormatError &e) {
        CHECK(e.kind() == FormatErrorKind::Truncated);
        const std::string what = e.what();
        CHECK(what.find(std::to_string(bytes.size())) != std::string::npos);
        CHECK(what.find(std::to_string(short_payload.size())) != std::string::npos);
    }
    CHECK_THROWS_AS(serialize_map(QCMap{3, 3, {}}), ShapeError);
}

TEST_CASE("QCB1 round trip") {
    MuFile f{2, 3, {}};
    for (int k = 0; k < 12; ++k) f.mu.values.push_back({0.01 * k, -0.02 * k});
    const auto bytes = serialize_mu(f);
    CHECK(bytes.size() == 12 + 8 * 12);
    const MuFile g = parse_mu(bytes);
    CHECK(g.height == 2);
    CHECK(g.width == 3);
    CHECK(serialize_mu(g) == bytes);
    auto tail = bytes;
    tail.push_back(1);
    CHECK(kind_of([&] { parse_mu(tail); }) == FormatErrorKind::TrailingBytes);
}

TEST_CASE("render_grid") {
    const QCMap id = identity_map(build_grid_mesh(20, 30));
    const Image g = render_grid(id, 5);
    CHECK(g.height == 20);
    CHECK(g.width == 30);
    for (int r = 0; r < 20; ++r) {
        for (int c = 0; c < 30; ++c) {
            const bool line = r % 5 == 0 || c % 5 == 0;
            CHECK(g.at(r, c) == (line ? 0.0 : 1.0));
        }
    }
    QCMap moved = id;
    for (auto &p : moved.positions) p += Vec2{2.0, 1.0};
    const Image s = render_grid(moved, 5);
    CHECK(s.at(3, 2) == 0.0);
    CHECK(s.at(8, 9) == 1.0);
    CHECK(s.at(9, 7) == 0.0);
    CHECK(s.at(10, 10) == 1.0);
    CHECK_THROWS_AS(render_grid(id, 1), InvalidDimensionError);
}

TEST_CASE("trace JSONL") {
    std::vector<TraceRecord> trace(2);
    trace[1].phase = Phase::Refinement;
    trace[1].iteration = 4;
    trace[1].energy.total = 1.5;
    std::istringstream in(trace_to_jsonl(trace));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char *key : {"iteration", "dirichlet", "alpha_nu", "coupling", "intensity", "fidelity", "total"}) {
            CHECK(j.contains(key));
        }
        if (n == 1) {
            CHECK(j["phase"] == "refinement");
            CHECK(j["total"] == 1.5);
        }
        ++n;
    }
    CHECK(n == 2);
}

TEST_CASE("config files") {
    const auto cfg = parse_config("# weights\nalpha = 2.5\nrho=10 # trailing\n\ndescriptor = raw\nlevels = 1\nbeta = 7\n");
    CHECK(cfg.alpha == 2.5);
    CHECK(cfg.rho == 10.0);
    CHECK(cfg.descriptor == Descriptor::RawIntensity);
    CHECK(cfg.levels == 1);
    CHECK(cfg.resolved_beta() == 7.0);
    CHECK(cfg.resolved_gamma() == 50.0);
    CHECK_THROWS_AS(parse_config("alpha = 1\nbogus = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("descriptor = cnn\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
    try {
        parse_config("alpha = 1\n\nlevels = x\n");
    } catch (const ConfigError &e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    const auto j = nlohmann::json::parse(config_to_json(cfg));
    CHECK(j.at("beta").get<double>() == 7.0);
    CHECK(j.at("gamma").get<double>() == 50.0);
    CHECK(j.contains("t1"));
}
