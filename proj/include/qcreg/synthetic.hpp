#pragma once

#include <string>
#include <vector>

#include "qcreg/image.hpp"

namespace qcreg {

struct ImagePair {
    std::string name;
    Image moving;
    Image fixed;
};

/// Soft-edged bright disk of radius 24 at (48, 64) in the moving image and at
/// (48 + shift, 64) in the static one, on a size x size canvas.
ImagePair translated_blob(int size = 128, double shift = 32.0);

/// Straight vertical bar (moving) against the same bar bent along
/// x = c + s sin(pi t) (static), t running over the bar's length.
ImagePair bent_bar(int size = 128);

/// Disk (moving) against an ellipse of similar area (static).
ImagePair warped_disk(int size = 128);

/// The three pairs above at their default size.
std::vector<ImagePair> shipped_examples();

/// Smooth low-frequency test pattern with values in [0.1, 0.9].
Image smooth_pattern(int height, int width, double phase = 0.0);

} // namespace qcreg
