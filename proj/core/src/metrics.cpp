#include "freetraj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "freetraj/errors.hpp"

namespace freetraj {

double iou(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double centroid_distance(const std::optional<BBox>& detected, const BBox& target) {
    const double cx = target.center_x();
    const double cy = target.center_y();
    if (!detected) {
        const double dx = std::max(cx, 1.0 - cx);
        const double dy = std::max(cy, 1.0 - cy);
        return std::hypot(dx, dy) / std::numbers::sqrt2;
    }
    return std::hypot(detected->center_x() - cx, detected->center_y() - cy) / std::numbers::sqrt2;
}

namespace {
void check_lengths(const BoxSequence& detected, const std::vector<BBox>& target) {
    if (detected.size() != target.size()) {
        throw ValidationError("detected sequence has " + std::to_string(detected.size()) +
                              " frames, target has " + std::to_string(target.size()));
    }
}
}  // namespace

double mean_iou(const BoxSequence& detected, const std::vector<BBox>& target) {
    check_lengths(detected, target);
    if (target.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t f = 0; f < target.size(); ++f)
        if (detected[f]) sum += iou(*detected[f], target[f]);
    return sum / static_cast<double>(target.size());
}

MetricReport evaluate(const BoxSequence& detected, const std::vector<BBox>& target) {
    check_lengths(detected, target);
    MetricReport r;
    double cd_sum = 0.0;
    for (std::size_t f = 0; f < target.size(); ++f) {
        r.iou.push_back(detected[f] ? iou(*detected[f], target[f]) : 0.0);
        r.centroid_distance.push_back(centroid_distance(detected[f], target[f]));
        cd_sum += r.centroid_distance.back();
        if (!detected[f]) ++r.missing;
    }
    r.mean_iou = mean_iou(detected, target);
    r.mean_centroid_distance = target.empty() ? 0.0 : cd_sum / static_cast<double>(target.size());
    return r;
}

}  // namespace freetraj
