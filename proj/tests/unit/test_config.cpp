#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "tumorfab/config.hpp"
#include "tumorfab/error.hpp"

using namespace tumorfab;
using namespace tumorfab::testing;

TEST_SUITE("config") {
  TEST_CASE("defaults carry the published settings") {
    const auto c = load_config("", {});
    CHECK(c.stage1.sigma == 2.0);
    CHECK(c.stage1.fit.learning_rate == 1e-2);
    CHECK(c.stage1.fit.optimizer == "sgd");
    CHECK(c.stage1.fit.epochs == 200);
    CHECK(c.stage2.train.epochs == 200);
    CHECK(c.stage2.train.lr_generator == 2e-4);
    CHECK(c.stage2.train.lr_discriminator == 1e-4);
    CHECK(c.stage2.train.crop == Dims3{128, 128, 128});
    CHECK(c.stage2.train.batch_size == 2);
    CHECK(c.stage2.train.weights.patch_adversarial == 10.0);
    CHECK(c.stage2.train.weights.global_adversarial == 1.0);
    CHECK(c.stage2.train.weights.hinge_start == 10.0);
    CHECK(c.stage2.train.weights.hinge_end == 1.0);
    CHECK(c.stage2.train.weights.perceptual == 1.0);
  }

  TEST_CASE("json round trip is lossless") {
    auto c = load_config("", {"stage1.epochs=7", "phantom.dims=[32,32,48]"}, 99, "somewhere");
    const auto j = to_json(c);
    auto back = config_from_json(j);
    back.resolve();
    CHECK(to_json(back) == j);
    CHECK(back.seed == 99);
    CHECK(back.out_dir == "somewhere");
  }

  TEST_CASE("overrides parse JSON values and fall back to strings") {
    const auto c = load_config("", {"stage2.window.overlap=0.25", "data.skull_strip_check=fail",
                                    "extractor.layers_for_percep=[0,1]"});
    CHECK(c.stage2.window.overlap == 0.25);
    CHECK(c.data.skull_strip_check == "fail");
    CHECK(c.stage2.train.percep_layers == std::vector<int>{0, 1});
  }

  TEST_CASE("unknown keys and bad values are validation errors") {
    CHECK_THROWS_AS(load_config("", {"stage1.nope=1"}), ValidationError);
    CHECK_THROWS_AS(load_config("", {"stage1.epochs"}), ValidationError);
    CHECK_THROWS_AS(load_config("", {"stage1.epochs=0"}), ValidationError);
    CHECK_THROWS_AS(load_config("", {"stage1.epochs=\"many\""}), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json", {}), ValidationError);
    const auto dir = temp_dir("cfg");
    std::ofstream(dir / "c.json") << R"({"stage2": {"crop": [32, 32, 32]}})";
    CHECK_THROWS_WITH_AS(load_config(dir / "c.json", {}), doctest::Contains("stage2.crop"), ValidationError);
  }

  TEST_CASE("partial files merge over defaults; flags win over the file") {
    const auto dir = temp_dir("cfg");
    std::ofstream(dir / "c.json") << R"({"seed": 5, "stage1": {"epochs": 3}})";
    const auto a = load_config(dir / "c.json", {});
    CHECK(a.seed == 5);
    CHECK(a.stage1.fit.epochs == 3);
    CHECK(a.stage1.sigma == 2.0);
    const auto b = load_config(dir / "c.json", {"stage1.epochs=4"}, 6);
    CHECK(b.seed == 6);
    CHECK(b.stage1.fit.epochs == 4);
  }

  TEST_CASE("module seeds derive from the global seed") {
    const auto a = load_config("", {}, 1), b = load_config("", {}, 2);
    CHECK(a.mask_augment.seed != b.mask_augment.seed);
    CHECK(a.mask_augment.seed != a.stage2.train.seed);
    CHECK(a.stage2.train.seed == load_config("", {}, 1).stage2.train.seed);
  }

  TEST_CASE("transform json round trip") {
    IntensityTransform t;
    t[Label::ED] = {1.25, -0.125};
    CHECK(transform_from_json(transform_to_json(t)) == t);
    CHECK_THROWS_AS(transform_from_json(Json::parse(R"({"NCR": {"gain": 1}})")), ValidationError);
  }

  TEST_CASE("hashing helpers") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(hex64(0xabcull) == "0000000000000abc");
  }
}
