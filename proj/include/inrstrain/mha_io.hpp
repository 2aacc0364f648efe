#pragma once

#include <filesystem>

#include "inrstrain/volume.hpp"

namespace inrstrain {

enum class ElementType { Float, Short, UChar };

// Reads any supported element type, converting to float intensities.
Volume3D read_mha_volume(const std::filesystem::path& path);

// Reads an integer-typed MetaImage as labels; rejects codes outside {0..3}.
LabelMask read_mha_mask(const std::filesystem::path& path);

// Float volumes are written as MET_FLOAT, masks as MET_UCHAR.
void write_mha(const Volume3D& vol, const std::filesystem::path& path);
void write_mha(const LabelMask& mask, const std::filesystem::path& path);

} // namespace inrstrain
