#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "freetraj/config.hpp"
#include "freetraj/errors.hpp"
#include "freetraj/metrics.hpp"
#include "freetraj/noise_guidance.hpp"
#include "freetraj/pipeline.hpp"
#include "freetraj/tensor_io.hpp"

namespace freetraj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::string out;
    ConfigOverrides overrides;
    std::string target;
    std::string detected;
};

RunConfig load_config(const Options& o) {
    if (o.config_path.empty()) return default_run_config(o.overrides);
    const fs::path path(o.config_path);
    return parse_run_config(read_text_file(path), path.string(), o.overrides, path.parent_path());
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::normal: return "normal";
        case Mode::long_video: return "long";
        case Mode::large: return "large";
    }
    return "normal";
}

json dims_json(const Shape4& s) { return {s.channels, s.frames, s.height, s.width}; }

std::string seed_hex(Seed s) { return hash_hex(s.value); }

json seeds_json(const RunConfig& rc) {
    const auto& s = rc.sampler.seeds;
    return {{"base", rc.base_seed.value},        {"noise", seed_hex(s.noise.frames)}, {"local", seed_hex(s.noise.local)},
            {"eta", seed_hex(s.noise.eta)},      {"shuffle", seed_hex(s.noise.shuffle)},
            {"model", seed_hex(s.model)},        {"prompt", seed_hex(s.prompt)},
            {"sampler", seed_hex(s.sampler)}};
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path.string());
    f << text;
    if (!f) throw ValidationError("failed writing " + path.string());
}

void write_ftnz(const fs::path& path, const ftnz::Array& a) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    ftnz::write_file(path, a);
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p.replace_extension();
    return fs::path(p.string() + suffix);
}

std::string ftnz_hash(const ftnz::Array& a) { return fnv1a_hex(ftnz::encode(a)); }

int cmd_plan(const Options& o, std::ostream& out) {
    const RunConfig rc = load_config(o);
    if (!rc.trajectory) throw ValidationError("plan: the config has no trajectory");
    const fs::path dir = o.out.empty() ? fs::path("plan") : fs::path(o.out);
    const auto boxes = interpolate_boxes(*rc.trajectory);

    auto resolutions = rc.plan.resolutions;
    if (resolutions.empty()) resolutions.emplace_back(rc.sampler.dims.height, rc.sampler.dims.width);

    write_text(dir / "boxes.json", boxes_to_json(boxes) + "\n");
    json masks = json::array();
    for (const auto& [h, w] : resolutions) {
        const auto arr = ftnz::from_masks(rasterize_masks(boxes, h, w));
        const fs::path p = dir / ("masks_" + std::to_string(h) + "x" + std::to_string(w) + ".ftnz");
        write_ftnz(p, arr);
        masks.push_back({{"height", h}, {"width", w}, {"path", p.string()}, {"hash", ftnz_hash(arr)}});
    }
    json report{{"command", "plan"},
                {"frames", boxes.size()},
                {"boxes", (dir / "boxes.json").string()},
                {"masks", masks}};
    out << report.dump(2) << "\n";
    return 0;
}

int cmd_noise(const Options& o, std::ostream& out) {
    const RunConfig rc = load_config(o);
    const SamplerConfig& s = rc.sampler;
    validate_sampler(s);
    FrameMaskStack masks;
    if (rc.trajectory) masks = plan_trajectory(*rc.trajectory, s.dims).second;
    const auto ncfg = noise_config_for(s, rc.trajectory.has_value());
    const auto result = build_initial_noise(ncfg, rc.trajectory ? &masks : nullptr, s.seeds.noise);

    const fs::path path = o.out.empty() ? fs::path("noise.ftnz") : fs::path(o.out);
    const auto arr = ftnz::from_tensor(result.noise);
    write_ftnz(path, arr);
    json report{{"command", "noise"},
                {"output", path.string()},
                {"dims", dims_json(s.dims)},
                {"mode", mode_name(s.mode)},
                {"stages", result.stages},
                {"keep_fraction", ncfg.keep_fraction},
                {"resampled_percentage", resampled_percentage(ncfg.keep_fraction)},
                {"seeds", seeds_json(rc)},
                {"config_hash", fnv1a_hex(rc.canonical)},
                {"output_hash", ftnz_hash(arr)}};
    out << report.dump(2) << "\n";
    return 0;
}

int cmd_generate(const Options& o, std::ostream& out) {
    const RunConfig rc = load_config(o);
    const auto result = generate(rc.sampler, rc.trajectory);

    const fs::path path = o.out.empty() ? fs::path("latent.ftnz") : fs::path(o.out);
    const auto arr = ftnz::from_tensor(result.latent);
    write_ftnz(path, arr);
    const fs::path manifest_path = sibling(path, ".manifest.json");
    json manifest{{"command", "generate"},
                  {"output", path.string()},
                  {"dims", dims_json(rc.sampler.dims)},
                  {"mode", mode_name(rc.sampler.mode)},
                  {"steps", rc.sampler.steps},
                  {"guided", rc.trajectory.has_value() &&
                                 (rc.sampler.noise_guidance || rc.sampler.attention_guidance)},
                  {"noise_stages", result.noise_stages},
                  {"seeds", seeds_json(rc)},
                  {"config", json::parse(rc.canonical)},
                  {"config_hash", fnv1a_hex(rc.canonical)},
                  {"output_hash", ftnz_hash(arr)}};
    write_text(manifest_path, manifest.dump(2) + "\n");
    manifest["manifest"] = manifest_path.string();
    manifest.erase("config");
    out << manifest.dump(2) << "\n";
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
    if (o.target.empty() || o.detected.empty()) throw ValidationError("eval needs --target and --detected");
    const auto target = parse_target_boxes(read_text_file(o.target), o.target);
    const auto detected = parse_box_sequence(read_text_file(o.detected), o.detected);
    out << report_to_json(evaluate(detected, target)) << "\n";
    return 0;
}

std::string direction_name(FlowDirection d) { return d == FlowDirection::up_right ? "up_right" : "down_right"; }

int cmd_demo_flow(const Options& o, std::ostream& out) {
    const RunConfig rc = load_config(o);
    const FlowDemoSettings& st = rc.demo_flow;
    const auto result = flow_demo(st, derive_seed(rc.base_seed, "demo_flow"));

    const fs::path path = o.out.empty() ? fs::path("demo_flow.ftnz") : fs::path(o.out);
    const auto arr = ftnz::from_tensor(result.noise);
    write_ftnz(path, arr);
    const fs::path report_path = sibling(path, ".json");
    json report{{"command", "demo-flow"},
                {"output", path.string()},
                {"report", report_path.string()},
                {"dims", dims_json(st.shape)},
                {"direction", direction_name(st.direction)},
                {"stride", st.stride},
                {"keep_fraction", st.keep_fraction},
                {"resampled_percentage", resampled_percentage(st.keep_fraction)},
                {"band_radius", st.band_radius},
                {"trials", st.trials},
                {"seed", rc.base_seed.value},
                {"similarity", result.mean_similarity},
                {"first_trial_similarity", result.trial_similarity.front()},
                {"output_hash", ftnz_hash(arr)}};
    write_text(report_path, report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trajectory-guided toy video diffusion", "freetraj"};
    app.require_subcommand(1);
    Options o;
    auto& ov = o.overrides;
    app.add_option("--config", o.config_path, "Run config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", ov.seed, "Base seed for every named stream");
    app.add_option("--out", o.out, "Output path (file or, for plan, directory)");
    app.add_option("--mode", ov.mode, "normal, long or large")
        ->check(CLI::IsMember({"normal", "long", "large"}));
    app.add_option("--frames", ov.frames, "Frame count");
    app.add_option("--alpha-scale", ov.alpha_scale, "Numerator of the cross-attention boost");
    app.add_option("--beta", ov.beta, "Soft-mask factor for self-attention");
    app.add_option("--edit-steps", ov.edit_steps, "Guided sampler steps (N)");
    app.add_option("--sigma-scale", ov.sigma_scale, "Gaussian weight width per box extent");
    app.add_option("--isolation-lambda", ov.isolation_lambda, "Isolation redistribution share");
    app.add_option("--keep-fraction", ov.keep_fraction, "Low-frequency fraction kept from the constructed noise");
    app.add_option("--direction", ov.direction, "Flow direction for demo-flow")
        ->check(CLI::IsMember({"down_right", "up_right"}));
    app.add_option("--stride", ov.stride, "Flow stride for demo-flow");
    app.add_option("--target", o.target, "Target boxes (eval)");
    app.add_option("--detected", o.detected, "Detected boxes (eval)");

    using Command = int (*)(const Options&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"plan", "Interpolate the trajectory and rasterize masks", cmd_plan},
        {"noise", "Build the guided initial noise", cmd_noise},
        {"generate", "Run the toy sampler", cmd_generate},
        {"eval", "Score detected boxes against a target trajectory", cmd_eval},
        {"demo-flow", "Noise-flow resampling demonstration", cmd_demo_flow},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        for (const auto& [name, help, fn] : commands) {
            if (app.got_subcommand(name)) return fn(o, out);
        }
        throw InternalError("no command selected");
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace freetraj::cli
