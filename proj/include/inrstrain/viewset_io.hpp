#pragma once

#include <filesystem>
#include <optional>

#include "inrstrain/phantom.hpp"
#include "inrstrain/volume.hpp"

namespace inrstrain {

// Directory layout: viewset.json plus <view>_img_<t>.mha and
// <view>_seg_<t>.mha for view in {sax, ch4, ch2}; ground_truth.json when
// the data came from the phantom.
void write_viewset(const ViewSet& views, const std::filesystem::path& dir);
ViewSet read_viewset(const std::filesystem::path& dir);

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);
std::optional<GroundTruth> read_ground_truth(const std::filesystem::path& dir);

} // namespace inrstrain
