#pragma once

// Procedural scene generator for training and evaluation fixtures: clear
// visible image, registered infrared image, synthetic depth map, and the hazy
// render with its ground-truth haze.

#include <array>

#include "irvf/haze.hpp"
#include "irvf/rng.hpp"
#include "irvf/tensor.hpp"

namespace irvf {

enum class DepthFamily { Ramp, Radial, Step };

struct Scene {
    TensorD clear;    // (3,H,W) haze-free visible
    TensorD ir;       // (1,H,W) infrared
    TensorD depth;    // (1,H,W) synthetic depth
    TensorD hazy;     // (3,H,W) rendered hazy visible
    TensorD haze_gt;  // (1,H,W) ground truth 1 - exp(-beta*d)
    double beta = 0.0;
    std::array<double, 3> airlight{};
};

TensorD make_depth(Rng& rng, int h, int w, DepthFamily family);

// Draws beta from [0.6, 1.8] and airlight from [0.7, 1.0].
Scene make_scene(Rng& rng, int h, int w, DepthFamily family);

inline DepthFamily depth_family(int index) {
    switch (index % 3) {
        case 0: return DepthFamily::Ramp;
        case 1: return DepthFamily::Radial;
        default: return DepthFamily::Step;
    }
}

}  // namespace irvf
