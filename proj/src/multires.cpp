#include <algorithm>
#include <string>
#include <vector>

#include "qcreg/errors.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/optimizer.hpp"

namespace qcreg {

QCMap upsample_map(const QCMap &coarse) {
    const TriMesh coarse_mesh = build_grid_mesh(coarse.height, coarse.width);
    if (coarse.positions.size() != coarse_mesh.n_vertices()) throw ShapeError("map payload does not match its size");
    QCMap fine;
    fine.height = 2 * coarse.height;
    fine.width = 2 * coarse.width;
    fine.positions.resize(static_cast<std::size_t>(fine.height + 1) * static_cast<std::size_t>(fine.width + 1));
    for (int i = 0; i <= fine.height; ++i) {
        for (int j = 0; j <= fine.width; ++j) {
            const Vec2 p = interpolate(coarse_mesh, coarse.positions, {0.5 * j, 0.5 * i});
            fine.positions[static_cast<std::size_t>(i) * static_cast<std::size_t>(fine.width + 1) +
                           static_cast<std::size_t>(j)] = 2.0 * p;
        }
    }
    return fine;
}

MultiresResult register_multires(const Image &moving, const Image &fixed, const CorrelationMatrix &correlation,
                                 const RegistrationConfig &config) {
    config.validate();
    const int factor = 1 << config.levels;
    if (moving.height % factor != 0 || moving.width % factor != 0) {
        throw InvalidDimensionError("image " + std::to_string(moving.height) + "x" + std::to_string(moving.width) +
                                    " is not divisible by 2^" + std::to_string(config.levels));
    }
    std::vector<Image> moving_pyr{moving}, fixed_pyr{fixed};
    for (int l = 1; l <= config.levels; ++l) {
        moving_pyr.push_back(downsample2(moving_pyr.back()));
        fixed_pyr.push_back(downsample2(fixed_pyr.back()));
    }

    RegistrationConfig level_config = config;
    if (level_config.smoothing_side == 0.0) level_config.smoothing_side = std::max(moving.height, moving.width);

    MultiresResult result;
    std::optional<QCMap> initial;
    for (int l = config.levels; l >= 0; --l) {
        const auto idx = static_cast<std::size_t>(l);
        RegistrationProblem problem(moving_pyr[idx], fixed_pyr[idx], correlation, level_config);
        RegistrationState state = register_images(problem, initial, l);
        state = refine_intensity(problem, std::move(state), l);
        result.trace.insert(result.trace.end(), state.trace.begin(), state.trace.end());
        if (l > 0) initial = upsample_map(state.map);
        result.state = std::move(state);
    }
    return result;
}

} // namespace qcreg
