#pragma once

#include <string>

#include "inrstrain/volume.hpp"

namespace inrstrain {

struct UpsampleSpec {
    int factor = 6;
    std::string method = "linear";

    void validate() const;
};

// Through-plane resolution increase: nz' = (nz-1)k + 1, spacing_z / k.
// Original slices land bit-exactly on indices that are multiples of k.
Volume3D upsample_through_plane(const Volume3D& vol, const UpsampleSpec& spec);

// Linear interpolation of per-label one-hot channels followed by argmax;
// ties resolve to the lowest label code.
LabelMask upsample_mask(const LabelMask& mask, const UpsampleSpec& spec);

Geometry upsampled_geometry(const Geometry& g, int factor);

} // namespace inrstrain
