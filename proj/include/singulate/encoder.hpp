#pragma once

#include <vector>

#include "singulate/perception.hpp"
#include "singulate/proposals.hpp"

namespace singulate {

/// Resampling conventions baked into a trained model; train and inference
/// encodings must agree on every field.
struct EncoderConventions {
    std::int32_t crop_size = 64;
    std::int32_t anchor_x = 32;
    std::int32_t anchor_y = 32;
    std::int32_t interpolation = 0;  ///< 0 = bilinear with zero fill
    double gray_lo = 0.3;
    double gray_hi = 1.0;
    double working_scale = 320.0;  ///< working image pixels per meter

    bool operator==(const EncoderConventions&) const = default;
};

/// Push-centric network input: the observation resampled so the push start
/// sits at the anchor pixel and the push direction points along +x.
struct PushImage {
    static constexpr int size = 64;
    std::vector<float> pixels;  ///< row-major size x size, in [0,1]
    PushProposal proposal;

    float at(int x, int y) const { return pixels[std::size_t(y) * size + x]; }
};

/// Bilinear sample with zero fill outside the pixel-center support.
inline float sample_bilinear(const ObservationImage& obs, double x, double y) {
    if (x <= -1.0 || y <= -1.0 || x >= obs.width() || y >= obs.height()) return 0.0f;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0, fy = y - y0;
    auto at = [&](int ix, int iy) -> double {
        if (ix < 0 || iy < 0 || ix >= obs.width() || iy >= obs.height()) return 0.0;
        return obs.pixels[std::size_t(iy) * obs.width() + ix];
    };
    return static_cast<float>((1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x0 + 1, y0) +
                              (1 - fx) * fy * at(x0, y0 + 1) + fx * fy * at(x0 + 1, y0 + 1));
}

/// o_res: translate the push start to the anchor, rotate so the push points
/// along the crop +x axis, center-crop to 64x64.
inline PushImage encode(const ObservationImage& obs, const PushProposal& proposal) {
    if (!pixel_in_bounds(obs.view, proposal.c))
        throw std::invalid_argument("encode: proposal start outside the working image");
    constexpr int n = PushImage::size;
    constexpr double ax = 32.0, ay = 32.0;
    PushImage out;
    out.proposal = proposal;
    out.pixels.resize(std::size_t(n) * n);

    // alpha is measured in the displayed (y-down) frame; the stored image is
    // y-up, so the stored-frame rotation angle is -alpha
    double ca = std::cos(proposal.alpha), sa = std::sin(proposal.alpha);
    for (int yo = 0; yo < n; ++yo) {
        double dy = yo - ay;
        for (int xo = 0; xo < n; ++xo) {
            double dx = xo - ax;
            double sx = proposal.c.x + ca * dx + sa * dy;
            double sy = proposal.c.y - sa * dx + ca * dy;
            out.pixels[std::size_t(yo) * n + xo] = sample_bilinear(obs, sx, sy);
        }
    }
    return out;
}

}  // namespace singulate
