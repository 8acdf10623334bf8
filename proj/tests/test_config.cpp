#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <string>

#include "freetraj/config.hpp"
#include "freetraj/errors.hpp"
#include "helpers.hpp"

using namespace freetraj;

namespace {

using fs_path = std::filesystem::path;

std::string error_of(std::string_view text, const ConfigOverrides& o = {}) {
    try {
        (void)parse_run_config(text, "run.json", o);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

const char* kTrajectory = R"({"frames": 16, "keyframes": [
  {"frame": 0, "box": [0.05, 0.3, 0.4, 0.7]},
  {"frame": 15, "box": [0.6, 0.3, 0.95, 0.7]}]})";

}  // namespace

TEST_CASE("defaults") {
    const auto rc = default_run_config();
    const SamplerConfig s = rc.sampler;
    CHECK(s.dims == Shape4{4, 16, 16, 24});
    CHECK(s.steps == 50);
    CHECK(s.eta == 0.0);
    CHECK(s.cfg_scale == 12.0);
    CHECK(s.guidance.beta == 0.01);
    CHECK(s.keep_fraction == 0.25);
    CHECK(s.guidance.edit_steps == 10);
    CHECK_FALSE(rc.trajectory.has_value());
    CHECK(rc.base_seed == Seed{42});
    CHECK(s.seeds.model == GenerationSeeds::from_base(Seed{42}).model);
    CHECK(rc.demo_flow.shape == s.dims);
}

TEST_CASE("unknown fields are reported with line and pointer") {
    const std::string text = "{\n  \"steps\": 20,\n  \"guidance\": {\n    \"bta\": 0.5\n  }\n}\n";
    const auto msg = error_of(text);
    CHECK(msg.find("run.json:4:") == 0);
    CHECK(msg.find("/guidance/bta") != std::string::npos);
    CHECK(msg.find("unknown field") != std::string::npos);
    CHECK(error_of("{\"foo\": 1}").find("run.json:1: /foo") == 0);
}

TEST_CASE("type and range errors") {
    CHECK(error_of("{\"steps\": \"many\"}").find("/steps") != std::string::npos);
    CHECK(error_of("{\"steps\": -3}").find("non-negative") != std::string::npos);
    CHECK(error_of("{\"guidance\": {\"beta\": 1.5}}").find("/guidance/beta") != std::string::npos);
    CHECK(error_of("{\"guidance\": {\"edit_steps\": 60}}").find("edit_steps") != std::string::npos);
    CHECK(error_of("{\"mode\": \"huge\"}").find("/mode") != std::string::npos);
    CHECK(error_of("{\"guidance\": {\"filter\": \"box\"}}").find("/guidance/filter") != std::string::npos);
    CHECK(error_of("{\"prompt\": {\"tokens\": 3, \"fg_tokens\": [4]}}").find("/prompt/fg_tokens/0") != std::string::npos);
    CHECK(error_of("{\n\"steps\": 3,\n}").find("run.json:3: invalid JSON") == 0);
    CHECK(error_of("[1, 2]").find("expected an object") != std::string::npos);
}

TEST_CASE("trajectory errors point at the keyframe") {
    const std::string swapped = R"({"frames": 16, "keyframes": [
  {"frame": 0, "box": [0.1, 0.1, 0.3, 0.3]},
  {"frame": 9, "box": [0.1, 0.1, 0.3, 0.3]},
  {"frame": 4, "box": [0.1, 0.1, 0.3, 0.3]},
  {"frame": 15, "box": [0.1, 0.1, 0.3, 0.3]}]})";
    std::string msg;
    try {
        (void)parse_trajectory(swapped, "t.json");
    } catch (const ValidationError& e) {
        msg = e.what();
    }
    CHECK(msg.find("t.json:4: /keyframes/2/frame") == 0);

    CHECK_THROWS_AS((void)parse_trajectory(R"({"frames": 4, "keyframes": [{"frame": 0, "box": [0.5, 0, 0.2, 1]}, {"frame": 3, "box": [0, 0, 1, 1]}]})", "t"),
                    ValidationError);
    CHECK_THROWS_AS((void)parse_trajectory(R"({"frames": 4, "keyframes": [{"frame": 0, "box": [0, 0, 1, 1]}]})", "t"),
                    ValidationError);
    CHECK_THROWS_AS((void)parse_trajectory(R"({"frames": 4, "keyframes": [{"frame": 0, "box": [0, 0, 1]}, {"frame": 3, "box": [0, 0, 1, 1]}]})", "t"),
                    ValidationError);
    const auto t = parse_trajectory(kTrajectory, "t");
    CHECK(t.frames == 16);
    CHECK(t.keyframes[1].box == BBox{0.6, 0.3, 0.95, 0.7});
}

TEST_CASE("trajectory may be inline or a relative path") {
    const auto dir = testutil::scratch("config_paths");
    std::ofstream(dir / "traj.json") << kTrajectory;
    const auto by_path = parse_run_config(R"({"trajectory": "traj.json"})", "run.json", {}, dir);
    const auto inline_ = parse_run_config(std::string("{\"trajectory\": ") + kTrajectory + "}", "run.json");
    REQUIRE(by_path.trajectory.has_value());
    REQUIRE(inline_.trajectory.has_value());
    CHECK(by_path.trajectory->keyframes.size() == inline_.trajectory->keyframes.size());
    CHECK(error_of(R"({"trajectory": "missing.json"})").find("/trajectory") != std::string::npos);
}

TEST_CASE("overrides take precedence") {
    ConfigOverrides o;
    o.seed = 7;
    o.beta = 0.2;
    o.keep_fraction = 0.5;
    o.edit_steps = 4;
    o.direction = "up_right";
    o.stride = 3;
    const auto rc = parse_run_config(R"({"guidance": {"beta": 0.05}, "seeds": {"base": 1}})", "run.json", o);
    CHECK(rc.base_seed == Seed{7});
    CHECK(rc.sampler.guidance.beta == 0.2);
    CHECK(rc.sampler.keep_fraction == 0.5);
    CHECK(rc.demo_flow.keep_fraction == 0.5);
    CHECK(rc.sampler.guidance.edit_steps == 4);
    CHECK(rc.demo_flow.direction == FlowDirection::up_right);
    CHECK(rc.demo_flow.stride == 3);
    CHECK(rc.sampler.seeds.noise.frames == GenerationSeeds::from_base(Seed{7}).noise.frames);

    ConfigOverrides bad;
    bad.beta = 3.0;
    CHECK(error_of("{}", bad).find("/guidance/beta") != std::string::npos);
}

TEST_CASE("modes resolve the latent shape") {
    ConfigOverrides lo;
    lo.mode = "long";
    const auto l = default_run_config(lo);
    CHECK(l.sampler.mode == Mode::long_video);
    CHECK(l.sampler.dims.frames == 64);
    lo.frames = 48;
    CHECK(default_run_config(lo).sampler.dims.frames == 48);

    ConfigOverrides la;
    la.mode = "large";
    const auto g = default_run_config(la);
    CHECK(g.sampler.dims == Shape4{4, 16, 32, 24});
    CHECK(g.demo_flow.shape == g.sampler.dims);

    ConfigOverrides fr;
    fr.frames = 8;
    CHECK(default_run_config(fr).sampler.dims.frames == 8);
}

TEST_CASE("named seeds override the derived streams") {
    const auto rc = parse_run_config(R"({"seeds": {"base": 5, "model": 99}})", "run.json");
    CHECK(rc.sampler.seeds.model == Seed{99});
    CHECK(rc.sampler.seeds.prompt == GenerationSeeds::from_base(Seed{5}).prompt);
}

TEST_CASE("canonical form ignores key order and whitespace") {
    const auto a = parse_run_config(R"({"steps": 20, "eta": 0.0})", "a");
    const auto b = parse_run_config("{\n  \"eta\": 0.0,\n  \"steps\": 20\n}", "b");
    CHECK(a.canonical == b.canonical);
    CHECK(fnv1a_hex(a.canonical) == fnv1a_hex(b.canonical));
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("box files") {
    const auto seq = parse_box_sequence("[[0, 0, 0.5, 0.5], null, [0.25, 0.25, 1, 1]]", "d.json");
    REQUIRE(seq.size() == 3);
    CHECK_FALSE(seq[1].has_value());
    CHECK(seq[2]->x0 == 0.25);
    CHECK_THROWS_AS((void)parse_box_sequence("{}", "d"), ValidationError);
    CHECK_THROWS_AS((void)parse_box_sequence("[[0, 0, 2, 1]]", "d"), ValidationError);
    CHECK_THROWS_AS((void)parse_target_boxes("[null]", "t"), ValidationError);
    CHECK(parse_target_boxes(kTrajectory, "t").size() == 16);
    const std::vector<BBox> boxes{{0, 0, 0.5, 0.5}, {0.125, 0.25, 0.75, 1}};
    CHECK(parse_target_boxes(boxes_to_json(boxes), "t") == boxes);
}

TEST_CASE("published schema agrees with the parser") {
    using nlohmann::json;
    const auto schema = json::parse(read_text_file(fs_path(FREETRAJ_DOCS_DIR) / "run_config.schema.json"));
    const auto defaults = default_run_config();
    for (const auto& [key, prop] : schema["properties"].items()) {
        if (prop.contains("default")) {
            const json doc{{key, prop["default"]}};
            CHECK_MESSAGE(error_of(doc.dump()).empty(), key);
        }
        if (prop.value("type", "") != "object") continue;
        CHECK_MESSAGE(error_of(json{{key, {{"no_such_field", 1}}}}.dump()).find("unknown field") != std::string::npos, key);
        json all = json::object();
        for (const auto& [sub, sp] : prop["properties"].items())
            if (sp.contains("default")) all[sub] = sp["default"];
        CHECK_MESSAGE(error_of(json{{key, all}}.dump()).empty(), key);
    }
    json every = json::object();
    for (const auto& [key, prop] : schema["properties"].items()) {
        if (prop.value("type", "") != "object") continue;
        json all = json::object();
        for (const auto& [sub, sp] : prop["properties"].items())
            if (sp.contains("default")) all[sub] = sp["default"];
        if (key != "long") every[key] = all;
    }
    const auto rc = parse_run_config(every.dump(), "defaults.json");
    CHECK(rc.sampler.dims == defaults.sampler.dims);
    CHECK(rc.sampler.seeds.model == defaults.sampler.seeds.model);
    CHECK(rc.sampler.guidance.alpha_scale == defaults.sampler.guidance.alpha_scale);
    CHECK(rc.sampler.model.qk_gain == defaults.sampler.model.qk_gain);
    CHECK(rc.demo_flow.trials == defaults.demo_flow.trials);
}
