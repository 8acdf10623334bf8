#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "freetraj/trajectory.hpp"

namespace freetraj {

/// Detector output per frame; nullopt marks a missed detection.
using BoxSequence = std::vector<std::optional<BBox>>;

struct MetricReport {
    std::vector<double> iou;
    double mean_iou = 0.0;
    std::vector<double> centroid_distance;
    double mean_centroid_distance = 0.0;
    std::size_t missing = 0;
};

[[nodiscard]] double iou(const BBox& a, const BBox& b);

/// Centroid distance over the unit-square diagonal. A missed detection
/// scores the distance from the target centroid to the farthest frame
/// corner, so the penalty bounds every real detection.
[[nodiscard]] double centroid_distance(const std::optional<BBox>& detected, const BBox& target);

/// Missing frames contribute IoU 0.
[[nodiscard]] double mean_iou(const BoxSequence& detected, const std::vector<BBox>& target);

[[nodiscard]] MetricReport evaluate(const BoxSequence& detected, const std::vector<BBox>& target);

}  // namespace freetraj
