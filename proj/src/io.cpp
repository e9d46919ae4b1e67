#include "qcreg/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <string>

#include <json.hpp>
#include <png.h>

#include "binary.hpp"
#include "qcreg/errors.hpp"
#include "qcreg/mesh.hpp"

namespace qcreg {

namespace {

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

Image decode_png(const std::vector<std::uint8_t> &bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw FormatError(FormatErrorKind::BadHeader, 0, "PNG: " + msg);
    }
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw FormatError(FormatErrorKind::Truncated, bytes.size(), "PNG: " + msg);
    }
    Image out(static_cast<int>(img.height), static_cast<int>(img.width));
    for (std::size_t k = 0; k < out.size(); ++k) out.pixels[k] = buffer[k] / 255.0;
    return out;
}

// Parses "P5 <w> <h> <maxval>" with '#' comments, followed by one whitespace byte.
Image decode_pgm(const std::vector<std::uint8_t> &bytes) {
    std::size_t pos = 2;
    auto skip = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char *what) {
        skip();
        const std::size_t start = pos;
        unsigned long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + static_cast<unsigned long>(bytes[pos] - '0');
            if (value > (1ul << 24)) throw FormatError(FormatErrorKind::BadHeader, start, std::string("PGM ") + what + " too large");
            ++pos;
        }
        if (pos == start) {
            if (pos >= bytes.size()) throw FormatError(FormatErrorKind::Truncated, pos, std::string("PGM header ends before ") + what);
            throw FormatError(FormatErrorKind::BadHeader, pos, std::string("PGM ") + what + " is not a number");
        }
        return value;
    };
    const unsigned long width = number("width");
    const unsigned long height = number("height");
    const std::size_t maxval_at = pos;
    const unsigned long maxval = number("maxval");
    if (width == 0 || height == 0) throw FormatError(FormatErrorKind::ZeroDimension, 2, "PGM has a zero dimension");
    if (maxval == 0 || maxval > 65535) {
        throw FormatError(FormatErrorKind::BadHeader, maxval_at, "PGM maxval " + std::to_string(maxval) + " outside [1, 65535]");
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw FormatError(bytes.size() <= pos ? FormatErrorKind::Truncated : FormatErrorKind::BadHeader, pos,
                          "PGM header must end with one whitespace byte");
    }
    ++pos;
    const std::uint64_t sample = maxval < 256 ? 1 : 2;
    detail::check_length(bytes, pos + sample * width * height);
    Image out(static_cast<int>(height), static_cast<int>(width));
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::uint8_t *p = bytes.data() + pos + sample * k;
        const unsigned v = sample == 1 ? p[0] : (static_cast<unsigned>(p[0]) << 8 | p[1]);
        out.pixels[k] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
    }
    return out;
}

std::string extension_of(const std::filesystem::path &path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

} // namespace

Image decode_image(const std::vector<std::uint8_t> &bytes) {
    static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    throw FormatError(FormatErrorKind::Unsupported, 0, "not an 8-bit PNG or binary PGM");
}

Image read_image(const std::filesystem::path &path) {
    try {
        return decode_image(detail::read_file(path));
    } catch (const FormatError &e) {
        throw FormatError(e.kind(), e.offset(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_pgm(const Image &image) {
    const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + image.size());
    for (double v : image.pixels) out.push_back(quantize(v));
    return out;
}

void write_image(const std::filesystem::path &path, const Image &image) {
    if (image.height <= 0 || image.width <= 0 || image.size() != static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width)) {
        throw ShapeError("cannot write an empty or inconsistent image");
    }
    const std::string ext = extension_of(path);
    if (ext == ".pgm") {
        detail::write_file(path, encode_pgm(image));
        return;
    }
    if (ext != ".png") throw FormatError(FormatErrorKind::Unsupported, 0, "unknown image extension '" + ext + "'");
    std::vector<std::uint8_t> buffer(image.size());
    for (std::size_t k = 0; k < image.size(); ++k) buffer[k] = quantize(image.pixels[k]);
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        throw Error("PNG write failed for " + path.string() + ": " + img.message);
    }
}

QCMap parse_map(const std::vector<std::uint8_t> &bytes) {
    const auto header = detail::read_dims(bytes, "QCM1");
    const std::uint64_t nv = (static_cast<std::uint64_t>(header.first) + 1) * (static_cast<std::uint64_t>(header.second) + 1);
    detail::check_length(bytes, 12 + 8 * nv);
    QCMap map;
    map.height = static_cast<int>(header.first);
    map.width = static_cast<int>(header.second);
    map.positions.resize(static_cast<std::size_t>(nv));
    const std::uint8_t *p = bytes.data() + 12;
    for (auto &v : map.positions) {
        v = {detail::get_f32(p), detail::get_f32(p + 4)};
        p += 8;
    }
    return map;
}

QCMap read_map(const std::filesystem::path &path) { return parse_map(detail::read_file(path)); }

std::vector<std::uint8_t> serialize_map(const QCMap &map) {
    if (map.height < 1 || map.width < 1 ||
        map.positions.size() != static_cast<std::size_t>(map.height + 1) * static_cast<std::size_t>(map.width + 1)) {
        throw ShapeError("map payload does not match its dimensions");
    }
    std::vector<std::uint8_t> out{'Q', 'C', 'M', '1'};
    out.reserve(12 + 8 * map.positions.size());
    detail::put_u32(out, static_cast<std::uint32_t>(map.height));
    detail::put_u32(out, static_cast<std::uint32_t>(map.width));
    for (const Vec2 &v : map.positions) {
        detail::put_f32(out, static_cast<float>(v.x));
        detail::put_f32(out, static_cast<float>(v.y));
    }
    return out;
}

void write_map(const std::filesystem::path &path, const QCMap &map) { detail::write_file(path, serialize_map(map)); }

MuFile parse_mu(const std::vector<std::uint8_t> &bytes) {
    const auto header = detail::read_dims(bytes, "QCB1");
    const std::uint64_t nf = 2ull * header.first * header.second;
    detail::check_length(bytes, 12 + 8 * nf);
    MuFile file;
    file.height = static_cast<int>(header.first);
    file.width = static_cast<int>(header.second);
    file.mu.values.resize(static_cast<std::size_t>(nf));
    const std::uint8_t *p = bytes.data() + 12;
    for (auto &v : file.mu.values) {
        v = {detail::get_f32(p), detail::get_f32(p + 4)};
        p += 8;
    }
    return file;
}

MuFile read_mu(const std::filesystem::path &path) { return parse_mu(detail::read_file(path)); }

std::vector<std::uint8_t> serialize_mu(const MuFile &file) {
    if (file.height < 1 || file.width < 1 ||
        file.mu.size() != 2 * static_cast<std::size_t>(file.height) * static_cast<std::size_t>(file.width)) {
        throw ShapeError("mu payload does not match its dimensions");
    }
    std::vector<std::uint8_t> out{'Q', 'C', 'B', '1'};
    out.reserve(12 + 8 * file.mu.size());
    detail::put_u32(out, static_cast<std::uint32_t>(file.height));
    detail::put_u32(out, static_cast<std::uint32_t>(file.width));
    for (const Complex &z : file.mu.values) {
        detail::put_f32(out, static_cast<float>(z.real()));
        detail::put_f32(out, static_cast<float>(z.imag()));
    }
    return out;
}

void write_mu(const std::filesystem::path &path, const MuFile &file) { detail::write_file(path, serialize_mu(file)); }

Image render_grid(const QCMap &map, int spacing) {
    if (spacing < 2) throw InvalidDimensionError("grid spacing must be at least 2");
    const TriMesh mesh = build_grid_mesh(map.height, map.width);
    if (map.positions.size() != mesh.n_vertices()) throw ShapeError("map payload does not match its dimensions");
    Image out(map.height, map.width, 1.0);
    auto plot = [&](Vec2 source) {
        const Vec2 p = interpolate(mesh, map.positions, source);
        const int c = static_cast<int>(std::lround(p.x));
        const int r = static_cast<int>(std::lround(p.y));
        if (r >= 0 && r < out.height && c >= 0 && c < out.width) out.at(r, c) = 0.0;
    };
    constexpr double step = 0.1;
    for (int x = 0; x <= map.width - 1; x += spacing) {
        for (double y = 0.0; y <= map.height - 1; y += step) plot({static_cast<double>(x), y});
    }
    for (int y = 0; y <= map.height - 1; y += spacing) {
        for (double x = 0.0; x <= map.width - 1; x += step) plot({x, static_cast<double>(y)});
    }
    return out;
}

std::string trace_to_jsonl(const std::vector<TraceRecord> &trace) {
    std::string out;
    for (const auto &r : trace) {
        nlohmann::ordered_json j;
        j["level"] = r.level;
        j["phase"] = to_string(r.phase);
        j["iteration"] = r.iteration;
        j["dirichlet"] = r.energy.dirichlet;
        j["alpha_nu"] = r.energy.alpha_nu;
        j["coupling"] = r.energy.coupling;
        j["intensity"] = r.energy.intensity;
        j["fidelity"] = r.energy.fidelity;
        j["total"] = r.energy.total;
        j["e_sim"] = r.e_sim;
        j["nu_sup"] = r.nu_sup;
        j["step"] = r.step;
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace qcreg
