#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freetraj/metrics.hpp"
#include "freetraj/noise_guidance.hpp"
#include "freetraj/pipeline.hpp"
#include "freetraj/trajectory.hpp"

namespace freetraj {

/// Command-line values that take precedence over the config file.
struct ConfigOverrides {
    std::optional<std::string> mode;
    std::optional<std::size_t> frames;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha_scale;
    std::optional<double> beta;
    std::optional<std::size_t> edit_steps;
    std::optional<double> sigma_scale;
    std::optional<double> isolation_lambda;
    std::optional<double> keep_fraction;
    std::optional<std::string> direction;
    std::optional<std::size_t> stride;
};

struct PlanSettings {
    /// (height, width) lattices to rasterize; empty means the latent size.
    std::vector<std::pair<std::size_t, std::size_t>> resolutions;
};


/// Fully resolved run description shared by every CLI command.
struct RunConfig {
    SamplerConfig sampler;
    std::optional<TrajectorySpec> trajectory;
    PlanSettings plan;
    /// Shape follows the sampler dims.
    FlowDemoSettings demo_flow;
    Seed base_seed{42};
    /// Canonical (sorted-key) JSON of the effective config, for hashing.
    std::string canonical;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ValidationError with a "source:line: /json/pointer: message" prefix.
[[nodiscard]] RunConfig parse_run_config(std::string_view text, const std::string& source,
                                         const ConfigOverrides& overrides = {},
                                         const std::filesystem::path& base_dir = {});
/// Defaults only (no file), with overrides applied.
[[nodiscard]] RunConfig default_run_config(const ConfigOverrides& overrides = {});

/// `{"frames": F, "keyframes": [{"frame": k, "box": [x0, y0, x1, y1]}, ...]}`.
[[nodiscard]] TrajectorySpec parse_trajectory(std::string_view text, const std::string& source);

/// JSON list of `[x0, y0, x1, y1]` or `null` entries.
[[nodiscard]] BoxSequence parse_box_sequence(std::string_view text, const std::string& source);

/// Target boxes from either a box list (no nulls) or a trajectory object.
[[nodiscard]] std::vector<BBox> parse_target_boxes(std::string_view text, const std::string& source);

[[nodiscard]] std::string boxes_to_json(const std::vector<BBox>& boxes);
[[nodiscard]] std::string report_to_json(const MetricReport& report);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view bytes);
[[nodiscard]] std::string hash_hex(std::uint64_t value);

}  // namespace freetraj
