#pragma once

// Label-preserving augmentation for (3,H,W) images in [0,1].
//
// Each transform is switched on independently with probability
// `policy.probability`; its magnitude is then drawn uniformly from the
// policy range. Geometric transforms resample bilinearly with edge
// clamping, the result is clamped back to [0,1].

#include <cstdint>

#include "covilearn/dataset.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

struct AugmentPolicy {
    double probability = 0.5;
    double max_rotation_deg = 15.0;
    double max_shift = 0.10;  // fraction of width / height
    double max_shear_deg = 10.0;
    double min_zoom = 0.9, max_zoom = 1.1;
    double min_aspect = 0.9, max_aspect = 1.1;
    double max_brightness = 0.2;
    double max_contrast = 0.2;
    double min_crop = 0.9;  // kept fraction of each side
    double max_jitter = 2.0 / 255.0;
    bool horizontal_flip = true;
    bool vertical_flip = true;
};

// One concrete draw. A default-constructed value is the identity.
struct AugmentParams {
    bool hflip = false;
    bool vflip = false;
    double rotation_deg = 0.0;
    double shift_x = 0.0, shift_y = 0.0;
    double shear_deg = 0.0;
    double zoom = 1.0;
    double aspect = 1.0;
    double crop = 1.0;
    double crop_x = 0.5, crop_y = 0.5;  // window position in [0,1]
    double brightness = 0.0;
    double contrast = 0.0;
    double jitter = 0.0;
    std::uint64_t jitter_seed = 0;
};

AugmentParams draw_augmentation(const AugmentPolicy& policy, std::uint64_t seed);

Tensor apply_augmentation(const Tensor& image, const AugmentParams& params);

Sample augment(const Sample& sample, const AugmentPolicy& policy, std::uint64_t seed);

}  // namespace covilearn
