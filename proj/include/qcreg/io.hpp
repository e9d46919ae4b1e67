#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qcreg/beltrami.hpp"
#include "qcreg/image.hpp"
#include "qcreg/optimizer.hpp"

namespace qcreg {

/// 8-bit PNG (colour converted to luminance) or binary PGM (P5, any maxval),
/// chosen by the file's magic bytes. Intensities are scaled into [0, 1].
Image read_image(const std::filesystem::path &path);
Image decode_image(const std::vector<std::uint8_t> &bytes);

/// Writes PNG or PGM according to the extension; values are quantized as
/// floor(255 v + 0.5) after clamping to [0, 1].
void write_image(const std::filesystem::path &path, const Image &image);
std::vector<std::uint8_t> encode_pgm(const Image &image);

/// QCM1: "QCM1", u32 LE height, u32 LE width, then (h+1)(w+1) (x, y) f32 LE
/// pairs in vertex row-major order.
QCMap read_map(const std::filesystem::path &path);
QCMap parse_map(const std::vector<std::uint8_t> &bytes);
void write_map(const std::filesystem::path &path, const QCMap &map);
std::vector<std::uint8_t> serialize_map(const QCMap &map);

/// QCB1 Beltrami field: "QCB1", u32 LE height, u32 LE width, then 2hw
/// (re, im) f32 LE pairs in mesh face order.
struct MuFile {
    int height = 0;
    int width = 0;
    BeltramiField mu;
};
MuFile read_mu(const std::filesystem::path &path);
MuFile parse_mu(const std::vector<std::uint8_t> &bytes);
void write_mu(const std::filesystem::path &path, const MuFile &file);
std::vector<std::uint8_t> serialize_mu(const MuFile &file);

/// Black images of the gridlines x = k spacing and y = k spacing under `map`,
/// on a white h x w canvas. Throws InvalidDimensionError if spacing < 2.
Image render_grid(const QCMap &map, int spacing);

/// One JSON object per line.
std::string trace_to_jsonl(const std::vector<TraceRecord> &trace);

} // namespace qcreg
