#include "qcreg/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qcreg/errors.hpp"

namespace qcreg {

std::size_t PatchGrid::patch_at(Vec2 point) const noexcept {
    const int p = patches_per_side;
    const int bw = image_width / p, bh = image_height / p;
    const int x = std::clamp(static_cast<int>(std::floor(point.x)), 0, image_width - 1);
    const int y = std::clamp(static_cast<int>(std::floor(point.y)), 0, image_height - 1);
    const int px = std::min(x / bw, p - 1);
    const int py = std::min(y / bh, p - 1);
    return static_cast<std::size_t>(py) * static_cast<std::size_t>(p) + static_cast<std::size_t>(px);
}

double PatchGrid::center_spacing() const noexcept {
    return 0.5 * (static_cast<double>(image_width) + static_cast<double>(image_height)) /
           static_cast<double>(patches_per_side);
}

PatchGrid partition_patches(int image_height, int image_width, int patches_per_side) {
    const int p = patches_per_side;
    if (p < 2) throw PartitionError("need at least 2 patches per side, got " + std::to_string(p));
    if (image_height < p || image_width < p) {
        throw PartitionError("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                             " is smaller than " + std::to_string(p) + " pixels per side");
    }
    PatchGrid grid;
    grid.patches_per_side = p;
    grid.image_height = image_height;
    grid.image_width = image_width;
    const int bw = image_width / p, bh = image_height / p;
    for (int py = 0; py < p; ++py) {
        for (int px = 0; px < p; ++px) {
            PixelRect r;
            r.x0 = px * bw;
            r.y0 = py * bh;
            r.x1 = (px == p - 1) ? image_width : (px + 1) * bw;
            r.y1 = (py == p - 1) ? image_height : (py + 1) * bh;
            grid.rects.push_back(r);
            grid.centers.push_back({0.5 * (r.x0 + r.x1 - 1), 0.5 * (r.y0 + r.y1 - 1)});
        }
    }
    return grid;
}

namespace {

void raw_descriptor(const Image &image, const PixelRect &r, float *out) {
    const double pw = r.x1 - r.x0, ph = r.y1 - r.y0;
    bool any = false;
    for (int ky = 0; ky < kRawWindow; ++ky) {
        for (int kx = 0; kx < kRawWindow; ++kx) {
            const double x = r.x0 + (kx + 0.5) * pw / kRawWindow - 0.5;
            const double y = r.y0 + (ky + 0.5) * ph / kRawWindow - 0.5;
            const auto v = static_cast<float>(sample_image(image, {x, y}));
            out[ky * kRawWindow + kx] = v;
            any = any || v != 0.0f;
        }
    }
    if (!any) std::fill(out, out + kRawWindow * kRawWindow, kDescriptorEpsilon);
}

void hog_descriptor(const Image &image, const PixelRect &r, float *out) {
    const int pw = r.x1 - r.x0, ph = r.y1 - r.y0;
    std::array<double, kHogCells * kHogCells * kHogBins> hist{};
    // Gradients use only pixels inside the patch.
    auto value = [&](int y, int x) { return image.at(r.y0 + y, r.x0 + x); };
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            double gx = 0.0, gy = 0.0;
            if (pw > 1) {
                if (x == 0) gx = value(y, 1) - value(y, 0);
                else if (x == pw - 1) gx = value(y, pw - 1) - value(y, pw - 2);
                else gx = 0.5 * (value(y, x + 1) - value(y, x - 1));
            }
            if (ph > 1) {
                if (y == 0) gy = value(1, x) - value(0, x);
                else if (y == ph - 1) gy = value(ph - 1, x) - value(ph - 2, x);
                else gy = 0.5 * (value(y + 1, x) - value(y - 1, x));
            }
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            const double angle = std::atan2(gy, gx) + std::numbers::pi;
            int bin = static_cast<int>(angle / (2.0 * std::numbers::pi) * kHogBins);
            bin = std::clamp(bin, 0, kHogBins - 1);
            const int cy = y * kHogCells / ph;
            const int cx = x * kHogCells / pw;
            hist[static_cast<std::size_t>((cy * kHogCells + cx) * kHogBins + bin)] += mag;
        }
    }
    for (int cell = 0; cell < kHogCells * kHogCells; ++cell) {
        double sq = 0.0;
        for (int b = 0; b < kHogBins; ++b) {
            auto &v = hist[static_cast<std::size_t>(cell * kHogBins + b)];
            v += kDescriptorEpsilon;
            sq += v * v;
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (int b = 0; b < kHogBins; ++b) {
            out[cell * kHogBins + b] = static_cast<float>(hist[static_cast<std::size_t>(cell * kHogBins + b)] * inv);
        }
    }
}

} // namespace

FeatureBank extract_features_builtin(const Image &image, const PatchGrid &grid, Descriptor descriptor) {
    if (image.height != grid.image_height || image.width != grid.image_width) {
        throw ShapeError("patch grid was built for a different image size");
    }
    FeatureBank bank;
    bank.m = static_cast<std::uint32_t>(grid.size());
    bank.d = descriptor == Descriptor::RawIntensity ? kRawWindow * kRawWindow : kHogCells * kHogCells * kHogBins;
    bank.values.assign(static_cast<std::size_t>(bank.m) * bank.d, 0.0f);
    const auto m = static_cast<long>(bank.m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i) {
        float *out = bank.values.data() + static_cast<std::size_t>(i) * bank.d;
        const auto &rect = grid.rects[static_cast<std::size_t>(i)];
        if (descriptor == Descriptor::RawIntensity) raw_descriptor(image, rect, out);
        else hog_descriptor(image, rect, out);
    }
    return bank;
}

std::string_view to_string(CorrelationStage stage) noexcept {
    switch (stage) {
    case CorrelationStage::Raw: return "raw";
    case CorrelationStage::Normalized: return "normalized";
    case CorrelationStage::Eliminated: return "eliminated";
    case CorrelationStage::Sparsified: return "sparsified";
    }
    return "unknown";
}

namespace {

void require_stage(const CorrelationMatrix &c, CorrelationStage expected) {
    if (c.stage != expected) {
        throw StageError("correlation matrix is at stage '" + std::string(to_string(c.stage)) + "', expected '" +
                         std::string(to_string(expected)) + "'");
    }
}

Eigen::MatrixXd unit_rows(const FeatureBank &bank, const char *which) {
    Eigen::MatrixXd out(bank.m, bank.d);
    for (std::uint32_t i = 0; i < bank.m; ++i) {
        double sq = 0.0;
        for (std::uint32_t k = 0; k < bank.d; ++k) {
            const double v = bank.vector(i)[k];
            out(i, k) = v;
            sq += v * v;
        }
        if (!(sq > 0.0)) {
            throw ZeroVectorError(std::string(which) + " feature vector " + std::to_string(i) + " has zero norm");
        }
        out.row(i) /= std::sqrt(sq);
    }
    return out;
}

} // namespace

CorrelationMatrix correlation_raw(const FeatureBank &moving, const FeatureBank &fixed) {
    if (moving.m != fixed.m || moving.d != fixed.d) {
        throw ShapeError("feature banks differ: moving " + std::to_string(moving.m) + "x" + std::to_string(moving.d) +
                         ", static " + std::to_string(fixed.m) + "x" + std::to_string(fixed.d));
    }
    const Eigen::MatrixXd a = unit_rows(moving, "moving");
    const Eigen::MatrixXd b = unit_rows(fixed, "static");
    CorrelationMatrix c;
    c.stage = CorrelationStage::Raw;
    c.values.resize(moving.m, fixed.m);
    const auto m = static_cast<long>(moving.m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < m; ++j) c.values(i, j) = a.row(i).dot(b.row(j));
    }
    return c;
}

CorrelationMatrix row_normalize(const CorrelationMatrix &raw) {
    require_stage(raw, CorrelationStage::Raw);
    CorrelationMatrix c{CorrelationStage::Normalized, raw.values};
    const auto cols = static_cast<double>(c.values.cols());
    for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
        const double mean = c.values.row(i).sum() / cols;
        const double var = (c.values.row(i).array() - mean).square().sum() / cols;
        const double sd = std::sqrt(var);
        if (sd < 1e-12) c.values.row(i).setZero();
        else c.values.row(i) = (c.values.row(i).array() - mean) / sd;
    }
    return c;
}

CorrelationMatrix eliminate_background(const CorrelationMatrix &normalized) {
    require_stage(normalized, CorrelationStage::Normalized);
    const Eigen::Index m = normalized.values.rows();
    std::vector<char> duplicate(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double diff = (normalized.values.row(i) - normalized.values.row(j)).cwiseAbs().maxCoeff();
            if (diff <= kDuplicateRowTolerance) {
                duplicate[static_cast<std::size_t>(i)] = 1;
                duplicate[static_cast<std::size_t>(j)] = 1;
            }
        }
    }
    CorrelationMatrix c{CorrelationStage::Eliminated, normalized.values};
    for (Eigen::Index i = 0; i < m; ++i) {
        if (duplicate[static_cast<std::size_t>(i)]) c.values.row(i).setZero();
    }
    return c;
}

CorrelationMatrix sparsify(const CorrelationMatrix &eliminated, int k) {
    require_stage(eliminated, CorrelationStage::Eliminated);
    const Eigen::Index m = eliminated.values.rows();
    if (k < 1 || k > m) {
        throw InvalidDimensionError("sparsify budget k=" + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
    }
    struct Candidate {
        Eigen::Index row, col;
        double value;
    };
    std::vector<Candidate> maxima;
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index col = 0;
        const double v = eliminated.values.row(i).maxCoeff(&col);
        if (v > 0.0) maxima.push_back({i, col, v});
    }
    std::stable_sort(maxima.begin(), maxima.end(),
                     [](const Candidate &a, const Candidate &b) { return a.value > b.value; });
    if (maxima.size() > static_cast<std::size_t>(k)) maxima.resize(static_cast<std::size_t>(k));

    CorrelationMatrix c{CorrelationStage::Sparsified, Eigen::MatrixXd::Zero(m, eliminated.values.cols())};
    for (const auto &cand : maxima) c.values(cand.row, cand.col) = cand.value;
    return c;
}

CorrelationMatrix build_correlation(const FeatureBank &moving, const FeatureBank &fixed, int k) {
    return sparsify(eliminate_background(row_normalize(correlation_raw(moving, fixed))), k);
}

} // namespace qcreg
