#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "binary.hpp"
#include "qcreg/errors.hpp"
#include "qcreg/features.hpp"

namespace qcreg {

const char *to_string(FormatErrorKind kind) noexcept {
    switch (kind) {
    case FormatErrorKind::Unsupported: return "unsupported format";
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::BadHeader: return "bad header";
    case FormatErrorKind::ZeroDimension: return "zero dimension";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::TrailingBytes: return "trailing bytes";
    }
    return "format error";
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

} // namespace detail

FeatureBank parse_features(const std::vector<std::uint8_t> &bytes) {
    const auto header = detail::read_dims(bytes, "QCF1");
    detail::check_length(bytes, 12 + 4ull * header.first * header.second);
    FeatureBank bank;
    bank.m = header.first;
    bank.d = header.second;
    bank.values.resize(static_cast<std::size_t>(bank.m) * bank.d);
    const std::uint8_t *p = bytes.data() + 12;
    for (auto &v : bank.values) {
        v = detail::get_f32(p);
        p += 4;
    }
    return bank;
}

FeatureBank load_features(const std::filesystem::path &path) {
    return parse_features(detail::read_file(path));
}

std::vector<std::uint8_t> serialize_features(const FeatureBank &bank) {
    if (bank.values.size() != static_cast<std::size_t>(bank.m) * bank.d) {
        throw ShapeError("feature bank holds " + std::to_string(bank.values.size()) + " values, header says " +
                         std::to_string(bank.m) + "x" + std::to_string(bank.d));
    }
    std::vector<std::uint8_t> out{'Q', 'C', 'F', '1'};
    out.reserve(12 + 4 * bank.values.size());
    detail::put_u32(out, bank.m);
    detail::put_u32(out, bank.d);
    for (float v : bank.values) detail::put_f32(out, v);
    return out;
}

void write_features(const std::filesystem::path &path, const FeatureBank &bank) {
    detail::write_file(path, serialize_features(bank));
}

} // namespace qcreg
