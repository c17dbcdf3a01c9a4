#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "fxda/io/config.hpp"

using namespace fxda;

namespace {

const char* kFull = R"({
  "seed": 11,
  "out_dir": "runs/demo",
  "arch": {"family": "toy", "classes": 5},
  "data": {
    "source": {"kind": "toy_glyphs", "style": "A", "per_class": 32, "seed": 1},
    "target": {"kind": "toy_glyphs", "style": "B", "per_class": 32, "seed": 2},
    "target_test": {"kind": "toy_glyphs", "style": "B", "per_class": 8, "seed": 3},
    "protocol": {"kind": "partial", "classes": [0, 1, 2]},
    "image_size": 16
  },
  "train": {
    "batch_size": 16,
    "momentum": 0.9,
    "weights": {"cls": 5.0, "entropy": 0.2},
    "ablate": {"feedback": true},
    "pretrain_iters": [10, 10, 10, 10],
    "end_to_end_iters": [20, 10, 5],
    "pretrain_lr": [0.01, 0.01, 0.001, 0.001],
    "end_to_end_lr": [0.001, 0.001, 0.0001],
    "repeat": 2,
    "eval_every": 5
  },
  "eval": {"split": "test", "semantic_samples": 64}
})";

std::string patched(const std::string& needle, const std::string& repl) {
    std::string text = kFull;
    const size_t at = text.find(needle);
    REQUIRE(at != std::string::npos);
    text.replace(at, needle.size(), repl);
    return text;
}

}  // namespace

TEST_CASE("a complete config parses into every field") {
    RunConfig c = parse_run_config(kFull);
    REQUIRE(c.seed == 11);
    REQUIRE(c.out_dir == "runs/demo");
    REQUIRE(c.arch.family == ArchFamily::toy);
    REQUIRE(c.arch.num_classes == 5);
    REQUIRE(c.source.kind == DatasetSpec::Kind::toy_glyphs);
    REQUIRE(c.source.style == GlyphStyle::A);
    REQUIRE(c.target.style == GlyphStyle::B);
    REQUIRE(c.target.per_class == 32);
    REQUIRE(c.target_test.has_value());
    REQUIRE(c.target_test->per_class == 8);
    REQUIRE_FALSE(c.source_test.has_value());
    REQUIRE(c.protocol.kind == Protocol::Kind::partial);
    REQUIRE(c.protocol.class_subset == std::vector<int>{0, 1, 2});
    REQUIRE(c.image_size == 16);
    REQUIRE(c.train.batch_size == 16);
    REQUIRE(c.train.weights.cls == 5.0);
    REQUIRE(c.train.weights.entropy == 0.2);
    REQUIRE(c.train.weights.adv_fea == 1.0);
    REQUIRE(c.train.weights.enable_feedback == false);
    REQUIRE(c.train.weights.enable_sem == true);
    REQUIRE(c.train.pretrain_iters == std::array<int64_t, 4>{10, 10, 10, 10});
    REQUIRE(c.train.end_iters == std::array<int64_t, 3>{20, 10, 5});
    REQUIRE(c.train.refine_rounds == 2);
    REQUIRE(c.train.eval_every == 5);
    REQUIRE(c.eval.split == "test");
    REQUIRE(c.eval.semantic_samples == 64);
}

TEST_CASE("unknown keys are rejected at every level") {
    REQUIRE_THROWS_AS(parse_run_config(patched("\"seed\": 11", "\"sede\": 11")), ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"style\": \"A\"", "\"style\": \"A\", \"stile\": 1")),
        ConfigError);
    REQUIRE_THROWS_AS(parse_run_config(patched("\"cls\": 5.0", "\"clz\": 5.0")), ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"feedback\": true", "\"feedbck\": true")), ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"split\": \"test\"", "\"spilt\": \"test\"")), ConfigError);
    try {
        parse_run_config(patched("\"seed\": 11", "\"sede\": 11"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("sede") != std::string::npos);
    }
}

TEST_CASE("missing required keys and wrong types are named") {
    REQUIRE_THROWS_AS(parse_run_config("{}"), ConfigError);
    REQUIRE_THROWS_AS(parse_run_config("not json at all"), ConfigError);
    REQUIRE_THROWS_AS(parse_run_config("[1,2]"), ConfigError);
    REQUIRE_THROWS_AS(parse_run_config(patched("\"seed\": 11", "\"seed\": -4")), ConfigError);
    REQUIRE_THROWS_AS(parse_run_config(patched("\"batch_size\": 16", "\"batch_size\": \"x\"")),
                      ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("[10, 10, 10, 10]", "[10, 10, 10]")), ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"family\": \"toy\"", "\"family\": \"resnet\"")),
        ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("{\"kind\": \"partial\", \"classes\": [0, 1, 2]}",
                                 "{\"kind\": \"partial\", \"classes\": []}")),
        ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"style\": \"A\"", "\"style\": \"C\"")), ConfigError);
}

TEST_CASE("semantic validation still applies after parsing") {
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"classes\": 5", "\"classes\": 12")), ConfigError);
    // toy family accepts 2..10 classes; digits demands exactly 10
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"family\": \"toy\", \"classes\": 5",
                                 "\"family\": \"digits\", \"classes\": 5")),
        ConfigError);
    REQUIRE_THROWS_AS(
        parse_run_config(patched("\"momentum\": 0.9", "\"momentum\": 1.5")), ConfigError);
}

TEST_CASE("image size defaults follow the family") {
    std::string no_size = patched(",\n    \"image_size\": 16", "");
    RunConfig c = parse_run_config(no_size);
    REQUIRE(c.image_size == 16);
}

TEST_CASE("missing config files fail cleanly") {
    REQUIRE_THROWS_AS(load_run_config("/nonexistent/path/run.json"), ConfigError);
}

TEST_CASE("relative dataset paths resolve against the data root") {
    REQUIRE(resolve_path("mnist/img.idx", "/data") == "/data/mnist/img.idx");
    REQUIRE(resolve_path("mnist/img.idx", "/data/") == "/data/mnist/img.idx");
    REQUIRE(resolve_path("/abs/img.idx", "/data") == "/abs/img.idx");
    REQUIRE(resolve_path("mnist/img.idx", "") == "mnist/img.idx");
}

TEST_CASE("effective config serialization round trips") {
    RunConfig c = parse_run_config(kFull);
    c.seed = 99;  // simulate a flag override
    c.train.weights.enable_entropy = false;
    const std::string text = run_config_to_json(c);
    RunConfig back = parse_run_config(text);
    REQUIRE(back.seed == 99);
    REQUIRE(back.out_dir == c.out_dir);
    REQUIRE(back.arch.family == c.arch.family);
    REQUIRE(back.protocol.class_subset == c.protocol.class_subset);
    REQUIRE(back.train.weights.enable_entropy == false);
    REQUIRE(back.train.weights.enable_feedback == false);
    REQUIRE(back.train.weights.cls == 5.0);
    REQUIRE(back.train.pretrain_iters == c.train.pretrain_iters);
    REQUIRE(back.target_test.has_value());
    REQUIRE(back.eval.semantic_samples == 64);
    REQUIRE(run_config_to_json(back) == text);
}

TEST_CASE("a toy config assembles a ready task") {
    RunConfig c = parse_run_config(kFull);
    TransferTask task = make_task_from(c);
    REQUIRE(task.source.count() == 5 * 32);
    REQUIRE(task.target.count() > 0);
    REQUIRE(task.image_size == 16);
    for (int lab : task.target.labels) REQUIRE(lab <= 2);
}
