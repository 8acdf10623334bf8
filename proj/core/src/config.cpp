#include "freetraj/config.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "freetraj/errors.hpp"
#include "json_lines.hpp"

namespace freetraj {

using nlohmann::json;

namespace {

/// Error context for one JSON document.
class Doc {
public:
    Doc(std::string_view text, std::string source) : source_(std::move(source)) {
        try {
            root_ = json::parse(text.begin(), text.end());
        } catch (const json::parse_error& e) {
            std::size_t line = 1;
            for (std::size_t k = 0; k < e.byte && k < text.size(); ++k)
                if (text[k] == '\n') ++line;
            throw ValidationError(source_ + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
        }
        lines_ = detail::JsonLineIndex(text);
    }

    [[nodiscard]] json& root() { return root_; }
    [[nodiscard]] const std::string& source() const { return source_; }

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        throw ValidationError(source_ + ":" + std::to_string(lines_.line(ptr)) + ": " + (ptr.empty() ? "/" : ptr) +
                              ": " + msg);
    }

    void expect_object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
        if (!j.is_object()) fail(ptr, "expected an object");
        const std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j.items()) {
            if (!keys.contains(k)) fail(ptr + "/" + k, "unknown field \"" + k + "\"");
        }
    }

    [[nodiscard]] std::size_t uint_value(const json& j, const std::string& ptr, std::size_t min = 0) const {
        if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
            fail(ptr, "expected a non-negative integer");
        }
        const auto v = j.get<std::uint64_t>();
        if (v < min) fail(ptr, "must be >= " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }

    [[nodiscard]] std::uint64_t u64_value(const json& j, const std::string& ptr) const {
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
            fail(ptr, "expected an unsigned 64-bit integer");
        }
        return j.get<std::uint64_t>();
    }

    [[nodiscard]] double number(const json& j, const std::string& ptr) const {
        if (!j.is_number()) fail(ptr, "expected a number");
        return j.get<double>();
    }

    [[nodiscard]] double number_in(const json& j, const std::string& ptr, double lo, double hi) const {
        const double v = number(j, ptr);
        if (!(v >= lo && v <= hi)) fail(ptr, "must be in [" + fmt(lo) + ", " + fmt(hi) + "]");
        return v;
    }

    [[nodiscard]] bool boolean(const json& j, const std::string& ptr) const {
        if (!j.is_boolean()) fail(ptr, "expected true or false");
        return j.get<bool>();
    }

    [[nodiscard]] std::string string(const json& j, const std::string& ptr) const {
        if (!j.is_string()) fail(ptr, "expected a string");
        return j.get<std::string>();
    }

    [[nodiscard]] BBox box(const json& j, const std::string& ptr) const {
        if (!j.is_array() || j.size() != 4) fail(ptr, "a box is [x0, y0, x1, y1]");
        BBox b{number(j[0], ptr + "/0"), number(j[1], ptr + "/1"), number(j[2], ptr + "/2"),
               number(j[3], ptr + "/3")};
        try {
            validate_box(b);
        } catch (const ValidationError& e) {
            fail(ptr, e.what());
        }
        return b;
    }

    static std::string fmt(double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }

private:
    std::string source_;
    json root_;
    detail::JsonLineIndex lines_;
};

TrajectorySpec trajectory_from(const Doc& doc, const json& j, const std::string& ptr) {
    doc.expect_object(j, ptr, {"frames", "keyframes"});
    if (!j.contains("frames")) doc.fail(ptr, "missing field \"frames\"");
    if (!j.contains("keyframes")) doc.fail(ptr, "missing field \"keyframes\"");
    TrajectorySpec spec;
    spec.frames = doc.uint_value(j["frames"], ptr + "/frames", 1);
    const auto& keys = j["keyframes"];
    const std::string kptr = ptr + "/keyframes";
    if (!keys.is_array() || keys.empty()) doc.fail(kptr, "expected a non-empty list of keyframes");
    for (std::size_t k = 0; k < keys.size(); ++k) {
        const std::string p = kptr + "/" + std::to_string(k);
        doc.expect_object(keys[k], p, {"frame", "box"});
        if (!keys[k].contains("frame") || !keys[k].contains("box")) doc.fail(p, "keyframe needs \"frame\" and \"box\"");
        Keyframe key{doc.uint_value(keys[k]["frame"], p + "/frame"), doc.box(keys[k]["box"], p + "/box")};
        if (!spec.keyframes.empty() && key.frame <= spec.keyframes.back().frame) {
            doc.fail(p + "/frame", "keyframe frame indices must strictly increase");
        }
        if (key.frame >= spec.frames) doc.fail(p + "/frame", "keyframe frame is beyond the last frame");
        spec.keyframes.push_back(key);
    }
    if (spec.keyframes.front().frame != 0) doc.fail(kptr + "/0/frame", "first keyframe must be frame 0");
    if (spec.keyframes.back().frame != spec.frames - 1) {
        doc.fail(kptr + "/" + std::to_string(keys.size() - 1) + "/frame",
                 "last keyframe must be frame " + std::to_string(spec.frames - 1));
    }
    return spec;
}

void apply_overrides(json& j, const ConfigOverrides& o) {
    if (!j.is_object()) return;
    if (o.mode) j["mode"] = *o.mode;
    if (o.seed) j["seeds"]["base"] = *o.seed;
    if (o.frames) {
        const bool long_mode = j.contains("mode") && j["mode"] == "long";
        j[long_mode ? "long" : "dims"]["frames"] = *o.frames;
    }
    auto guidance = [&](const char* key, auto v) { j["guidance"][key] = v; };
    if (o.alpha_scale) guidance("alpha_scale", *o.alpha_scale);
    if (o.beta) guidance("beta", *o.beta);
    if (o.edit_steps) guidance("edit_steps", *o.edit_steps);
    if (o.sigma_scale) guidance("sigma_scale", *o.sigma_scale);
    if (o.isolation_lambda) guidance("isolation_lambda", *o.isolation_lambda);
    if (o.keep_fraction) {
        guidance("keep_fraction", *o.keep_fraction);
        j["demo_flow"]["keep_fraction"] = *o.keep_fraction;
    }
    if (o.direction) j["demo_flow"]["direction"] = *o.direction;
    if (o.stride) j["demo_flow"]["stride"] = *o.stride;
}

FilterKind filter_from(const Doc& doc, const json& j, const std::string& ptr) {
    const std::string s = doc.string(j, ptr);
    if (s == "ideal") return FilterKind::ideal;
    if (s == "gaussian") return FilterKind::gaussian;
    doc.fail(ptr, "filter must be \"ideal\" or \"gaussian\"");
}

RunConfig run_config_from(Doc& doc, const ConfigOverrides& overrides, const std::filesystem::path& base_dir) {
    json& j = doc.root();
    apply_overrides(j, overrides);
    doc.expect_object(j, "",
                      {"mode", "dims", "steps", "eta", "cfg_scale", "train_steps", "beta_start", "beta_end", "long",
                       "model", "prompt", "guidance", "seeds", "trajectory", "plan", "demo_flow", "repeat_spans",
                       "threads"});
    RunConfig rc;
    SamplerConfig& s = rc.sampler;

    if (j.contains("mode")) {
        const std::string m = doc.string(j["mode"], "/mode");
        if (m == "normal") s.mode = Mode::normal;
        else if (m == "long") s.mode = Mode::long_video;
        else if (m == "large") s.mode = Mode::large;
        else doc.fail("/mode", "mode must be normal, long or large");
    }
    if (j.contains("dims")) {
        const auto& d = j["dims"];
        doc.expect_object(d, "/dims", {"channels", "frames", "height", "width"});
        if (d.contains("channels")) s.dims.channels = doc.uint_value(d["channels"], "/dims/channels", 1);
        if (d.contains("frames")) s.dims.frames = doc.uint_value(d["frames"], "/dims/frames", 1);
        if (d.contains("height")) s.dims.height = doc.uint_value(d["height"], "/dims/height", 1);
        if (d.contains("width")) s.dims.width = doc.uint_value(d["width"], "/dims/width", 1);
    }
    std::size_t long_frames = 64;
    if (j.contains("long")) {
        const auto& l = j["long"];
        doc.expect_object(l, "/long", {"frames", "base_frames", "window", "stride"});
        if (l.contains("frames")) long_frames = doc.uint_value(l["frames"], "/long/frames", 1);
        if (l.contains("base_frames")) s.long_base_frames = doc.uint_value(l["base_frames"], "/long/base_frames", 1);
        if (l.contains("window")) s.windows.window = doc.uint_value(l["window"], "/long/window", 1);
        if (l.contains("stride")) s.windows.stride = doc.uint_value(l["stride"], "/long/stride", 1);
    }
    if (s.mode == Mode::long_video) s.dims.frames = long_frames;
    if (s.mode == Mode::large) s.dims.height *= 2;
    s.model.channels = s.dims.channels;

    if (j.contains("steps")) s.steps = doc.uint_value(j["steps"], "/steps", 1);
    if (j.contains("eta")) s.eta = doc.number_in(j["eta"], "/eta", 0.0, 1e9);
    if (j.contains("cfg_scale")) s.cfg_scale = doc.number(j["cfg_scale"], "/cfg_scale");
    if (j.contains("train_steps")) s.train_steps = doc.uint_value(j["train_steps"], "/train_steps", 1);
    if (j.contains("beta_start")) s.beta_start = doc.number_in(j["beta_start"], "/beta_start", 0.0, 1.0);
    if (j.contains("beta_end")) s.beta_end = doc.number_in(j["beta_end"], "/beta_end", 0.0, 1.0);
    if (s.steps > s.train_steps) doc.fail("/steps", "steps must not exceed train_steps");

    if (j.contains("model")) {
        const auto& m = j["model"];
        doc.expect_object(m, "/model", {"hidden", "heads", "text_dim", "levels", "first_attention_level", "output_scale",
                                          "qk_gain", "norm_groups"});
        if (m.contains("hidden")) s.model.hidden = doc.uint_value(m["hidden"], "/model/hidden", 1);
        if (m.contains("heads")) s.model.heads = doc.uint_value(m["heads"], "/model/heads", 1);
        if (m.contains("text_dim")) s.model.text_dim = doc.uint_value(m["text_dim"], "/model/text_dim", 1);
        if (m.contains("levels")) s.model.levels = doc.uint_value(m["levels"], "/model/levels", 1);
        if (m.contains("first_attention_level"))
            s.model.first_attention_level = doc.uint_value(m["first_attention_level"], "/model/first_attention_level");
        if (m.contains("output_scale")) s.model.output_scale = doc.number(m["output_scale"], "/model/output_scale");
        if (m.contains("qk_gain")) s.model.qk_gain = doc.number(m["qk_gain"], "/model/qk_gain");
        if (m.contains("norm_groups")) s.model.norm_groups = doc.uint_value(m["norm_groups"], "/model/norm_groups", 1);
    }
    if (j.contains("prompt")) {
        const auto& p = j["prompt"];
        doc.expect_object(p, "/prompt", {"tokens", "fg_tokens"});
        if (p.contains("tokens")) s.prompt.tokens = doc.uint_value(p["tokens"], "/prompt/tokens", 1);
        if (p.contains("fg_tokens")) {
            if (!p["fg_tokens"].is_array()) doc.fail("/prompt/fg_tokens", "expected a list of token indices");
            s.prompt.fg_tokens.clear();
            for (std::size_t k = 0; k < p["fg_tokens"].size(); ++k) {
                const std::string ptr = "/prompt/fg_tokens/" + std::to_string(k);
                const auto v = doc.uint_value(p["fg_tokens"][k], ptr);
                if (v >= s.prompt.tokens) doc.fail(ptr, "token index out of range");
                s.prompt.fg_tokens.push_back(v);
            }
        }
    }
    if (j.contains("guidance")) {
        const auto& g = j["guidance"];
        doc.expect_object(g, "/guidance",
                          {"enabled", "noise", "attention", "inject", "keep_fraction", "filter", "alpha_scale", "beta",
                           "edit_steps", "sigma_scale", "isolation_lambda", "isolation_threshold", "suppress"});
        if (g.contains("enabled") && !doc.boolean(g["enabled"], "/guidance/enabled")) {
            s.noise_guidance = false;
            s.attention_guidance = false;
        }
        if (g.contains("noise")) s.noise_guidance = s.noise_guidance && doc.boolean(g["noise"], "/guidance/noise");
        if (g.contains("attention"))
            s.attention_guidance = s.attention_guidance && doc.boolean(g["attention"], "/guidance/attention");
        if (g.contains("inject")) s.inject = doc.boolean(g["inject"], "/guidance/inject");
        if (g.contains("keep_fraction"))
            s.keep_fraction = doc.number_in(g["keep_fraction"], "/guidance/keep_fraction", 0.0, 1.0);
        if (g.contains("filter")) s.filter = filter_from(doc, g["filter"], "/guidance/filter");
        auto& gc = s.guidance;
        if (g.contains("alpha_scale")) gc.alpha_scale = doc.number_in(g["alpha_scale"], "/guidance/alpha_scale", 0.0, 1e9);
        if (g.contains("beta")) gc.beta = doc.number_in(g["beta"], "/guidance/beta", 0.0, 1.0);
        if (g.contains("edit_steps")) gc.edit_steps = doc.uint_value(g["edit_steps"], "/guidance/edit_steps");
        if (g.contains("sigma_scale")) {
            gc.sigma_scale = doc.number(g["sigma_scale"], "/guidance/sigma_scale");
            if (!(gc.sigma_scale > 0.0)) doc.fail("/guidance/sigma_scale", "must be > 0");
        }
        if (g.contains("isolation_lambda")) {
            gc.isolation_lambda = doc.number_in(g["isolation_lambda"], "/guidance/isolation_lambda", 0.0, 1.0);
            if (gc.isolation_lambda >= 1.0) doc.fail("/guidance/isolation_lambda", "must be < 1");
        }
        if (g.contains("isolation_threshold"))
            gc.isolation_threshold = doc.number_in(g["isolation_threshold"], "/guidance/isolation_threshold", 0.0, 1.0);
        if (g.contains("suppress")) gc.suppress = doc.boolean(g["suppress"], "/guidance/suppress");
        if (gc.edit_steps > s.steps) doc.fail("/guidance/edit_steps", "edit_steps must not exceed steps");
    }
    if (j.contains("seeds")) {
        const auto& sd = j["seeds"];
        doc.expect_object(sd, "/seeds", {"base", "noise", "local", "eta", "shuffle", "model", "prompt", "sampler"});
        if (sd.contains("base")) rc.base_seed = Seed{doc.u64_value(sd["base"], "/seeds/base")};
    }
    s.seeds = GenerationSeeds::from_base(rc.base_seed);
    if (j.contains("seeds")) {
        const auto& sd = j["seeds"];
        auto named = [&](const char* key, Seed& dst) {
            if (sd.contains(key)) dst = Seed{doc.u64_value(sd[key], std::string("/seeds/") + key)};
        };
        named("noise", s.seeds.noise.frames);
        named("local", s.seeds.noise.local);
        named("eta", s.seeds.noise.eta);
        named("shuffle", s.seeds.noise.shuffle);
        named("model", s.seeds.model);
        named("prompt", s.seeds.prompt);
        named("sampler", s.seeds.sampler);
    }
    if (j.contains("repeat_spans")) {
        const auto& r = j["repeat_spans"];
        if (!r.is_array()) doc.fail("/repeat_spans", "expected a list of spans");
        for (std::size_t k = 0; k < r.size(); ++k) {
            const std::string p = "/repeat_spans/" + std::to_string(k);
            doc.expect_object(r[k], p, {"start", "length", "source"});
            if (!r[k].contains("start") || !r[k].contains("length")) doc.fail(p, "span needs start and length");
            RepeatSpan sp{doc.uint_value(r[k]["start"], p + "/start"), doc.uint_value(r[k]["length"], p + "/length", 1),
                          0};
            sp.source = r[k].contains("source") ? doc.uint_value(r[k]["source"], p + "/source") : sp.start;
            s.repeat_spans.push_back(sp);
        }
    }
    if (j.contains("threads")) s.threads = doc.uint_value(j["threads"], "/threads", 1);

    if (j.contains("trajectory")) {
        const auto& t = j["trajectory"];
        if (t.is_string()) {
            const std::filesystem::path path = base_dir / t.get<std::string>();
            std::string text;
            try {
                text = read_text_file(path);
            } catch (const std::exception& e) {
                doc.fail("/trajectory", e.what());
            }
            rc.trajectory = parse_trajectory(text, path.string());
        } else {
            rc.trajectory = trajectory_from(doc, t, "/trajectory");
        }
    }
    if (j.contains("plan")) {
        const auto& p = j["plan"];
        doc.expect_object(p, "/plan", {"resolutions"});
        if (p.contains("resolutions")) {
            const auto& r = p["resolutions"];
            if (!r.is_array()) doc.fail("/plan/resolutions", "expected a list of [height, width] pairs");
            for (std::size_t k = 0; k < r.size(); ++k) {
                const std::string ptr = "/plan/resolutions/" + std::to_string(k);
                if (!r[k].is_array() || r[k].size() != 2) doc.fail(ptr, "expected [height, width]");
                rc.plan.resolutions.emplace_back(doc.uint_value(r[k][0], ptr + "/0", 1),
                                                 doc.uint_value(r[k][1], ptr + "/1", 1));
            }
        }
    }
    if (j.contains("demo_flow")) {
        const auto& d = j["demo_flow"];
        doc.expect_object(d, "/demo_flow", {"direction", "stride", "keep_fraction", "band_radius", "filter", "trials"});
        if (d.contains("direction")) {
            const std::string v = doc.string(d["direction"], "/demo_flow/direction");
            if (v == "down_right") rc.demo_flow.direction = FlowDirection::down_right;
            else if (v == "up_right") rc.demo_flow.direction = FlowDirection::up_right;
            else doc.fail("/demo_flow/direction", "direction must be down_right or up_right");
        }
        if (d.contains("stride")) rc.demo_flow.stride = doc.uint_value(d["stride"], "/demo_flow/stride");
        if (d.contains("keep_fraction"))
            rc.demo_flow.keep_fraction = doc.number_in(d["keep_fraction"], "/demo_flow/keep_fraction", 0.0, 1.0);
        if (d.contains("band_radius"))
            rc.demo_flow.band_radius = doc.number_in(d["band_radius"], "/demo_flow/band_radius", 0.0, 1.0);
        if (d.contains("filter")) rc.demo_flow.filter = filter_from(doc, d["filter"], "/demo_flow/filter");
        if (d.contains("trials")) rc.demo_flow.trials = doc.uint_value(d["trials"], "/demo_flow/trials", 1);
    }

    rc.demo_flow.shape = s.dims;
    try {
        validate_sampler(s);
        if (rc.trajectory) validate_trajectory(*rc.trajectory);
    } catch (const ValidationError& e) {
        doc.fail("", e.what());
    }
    rc.canonical = j.dump();
    return rc;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& source, const ConfigOverrides& overrides,
                           const std::filesystem::path& base_dir) {
    Doc doc(text, source);
    return run_config_from(doc, overrides, base_dir);
}

RunConfig default_run_config(const ConfigOverrides& overrides) {
    return parse_run_config("{}", "<defaults>", overrides);
}

TrajectorySpec parse_trajectory(std::string_view text, const std::string& source) {
    const Doc doc(text, source);
    return trajectory_from(doc, const_cast<Doc&>(doc).root(), "");
}

BoxSequence parse_box_sequence(std::string_view text, const std::string& source) {
    Doc doc(text, source);
    const json& j = doc.root();
    if (!j.is_array()) doc.fail("", "expected a list of boxes or nulls");
    BoxSequence seq;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (j[k].is_null()) seq.emplace_back(std::nullopt);
        else seq.emplace_back(doc.box(j[k], "/" + std::to_string(k)));
    }
    return seq;
}

std::vector<BBox> parse_target_boxes(std::string_view text, const std::string& source) {
    Doc doc(text, source);
    const json& j = doc.root();
    if (j.is_object()) return interpolate_boxes(trajectory_from(doc, j, ""));
    if (!j.is_array()) doc.fail("", "expected a list of boxes or a trajectory object");
    std::vector<BBox> boxes;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (j[k].is_null()) doc.fail("/" + std::to_string(k), "target boxes cannot be null");
        boxes.push_back(doc.box(j[k], "/" + std::to_string(k)));
    }
    return boxes;
}

std::string boxes_to_json(const std::vector<BBox>& boxes) {
    json out = json::array();
    for (const auto& b : boxes) out.push_back({b.x0, b.y0, b.x1, b.y1});
    return out.dump();
}

std::string report_to_json(const MetricReport& r) {
    json out;
    out["per_frame_iou"] = r.iou;
    out["miou"] = r.mean_iou;
    out["per_frame_cd"] = r.centroid_distance;
    out["mean_cd"] = r.mean_centroid_distance;
    out["missing"] = r.missing;
    out["frames"] = r.iou.size();
    return out.dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string hash_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return hash_hex(h);
}

}  // namespace freetraj
