#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/manifest.hpp"
#include "tumorfab/nifti_io.hpp"
#include "tumorfab/pipeline.hpp"

using namespace tumorfab;
using namespace tumorfab::testing;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& out, uint64_t seed = 3) {
  auto c = load_config("", {"phantom.dims=[32,32,32]", "phantom.brain_axes_mm=[13,14,12]", "phantom.texture_scale=8",
                            "phantom.texture_amplitude=200", "phantom.tumor.center_offset_mm=[2,-1,1]",
                            "phantom.tumor.ed_radii_mm=[7,6.5,6]", "phantom.tumor.ncr_radii_mm=[4.5,4,4]",
                            "phantom.tumor.et_radii_mm=[2.5,2.5,2]", "phantom.healthy_count=3",
                            "phantom.tumor_count=3", "mask_augment.min_tumor_voxels=16",
                            "mask_augment.shift_range_mm=4", "stage1.epochs=2", "stage2.epochs=1",
                            "stage2.crop_size=[32,32,32]", "stage2.generator.base_channels=4",
                            "stage2.generator.max_channels=16", "stage2.discriminator.base_channels=4",
                            "stage2.discriminator.max_channels=16", "stage2.window.size=[32,32,32]"},
                      seed, out.string());
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Fixture {
  fs::path root;
  PipelineConfig base;
  fs::path healthy, tumor;

  Fixture() : root(temp_dir("pipe")), base(small_config(root / "ph")) {
    cmd_phantom(base);
    auto c = base;
    c.out_dir = (root / "pre_h").string();
    cmd_preprocess(c, root / "ph" / "healthy");
    c.out_dir = (root / "pre_t").string();
    cmd_preprocess(c, root / "ph" / "tumor");
    healthy = root / "pre_h" / "manifest.jsonl";
    tumor = root / "pre_t" / "manifest.jsonl";
  }

  PipelineConfig at(const std::string& sub) const {
    auto c = base;
    c.out_dir = (root / sub).string();
    return c;
  }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("phantom and preprocess write counted, reproducible outputs") {
    Fixture f;
    CHECK(Manifest::read(f.root / "ph" / "fixtures.jsonl").size() == 6);
    const auto m = Manifest::read(f.tumor);
    REQUIRE(m.size() == 3);
    CHECK(m.has(0, "mask"));
    CHECK(fs::exists(m.path(0, "brain")));
    CHECK(fs::exists(f.root / "pre_t" / "resolved_config.json"));
    const auto img = load_volume(m.path(0, "image"));
    for (float x : img.data()) REQUIRE((x >= -1.0f && x <= 1.0f));

    auto again = f.at("pre_t2");
    cmd_preprocess(again, f.root / "ph" / "tumor");
    CHECK(slurp(f.tumor) == slurp(f.root / "pre_t2" / "manifest.jsonl"));
  }

  TEST_CASE("preprocess warns on non-stripped volumes and fails when configured") {
    const auto dir = temp_dir("pre");
    MriVolume v(1, {8, 8, 8}, {}, 10.0f);
    save_volume(v, dir / "skull.nii.gz");
    auto c = small_config(dir / "out");
    const auto r = cmd_preprocess(c, dir);
    CHECK(r.warnings.size() == 1);
    c.data.skull_strip_check = "fail";
    CHECK_THROWS_AS(cmd_preprocess(c, dir), ValidationError);
    const auto empty = temp_dir("empty");
    CHECK_THROWS_AS(cmd_preprocess(c, empty), ValidationError);
    CHECK_THROWS_AS(cmd_preprocess(c, empty / "missing"), IoError);
  }

  TEST_CASE("fabricate: zero count, determinism, validity, provenance") {
    Fixture f;
    const auto zero = cmd_fabricate(f.at("fab0"), f.healthy, f.tumor, 0, std::nullopt);
    CHECK(zero.summary["count"] == 0);
    CHECK(Manifest::read(f.root / "fab0" / "manifest.jsonl").empty());

    cmd_fit_intensity(f.at("fit"), f.healthy, f.tumor);
    const fs::path t = f.root / "fit" / "transform.json";
    REQUIRE(fs::exists(t));
    cmd_fabricate(f.at("fab1"), f.healthy, f.tumor, 5, t);
    cmd_fabricate(f.at("fab2"), f.healthy, f.tumor, 5, t);
    const auto a = Manifest::read(f.root / "fab1" / "manifest.jsonl");
    const auto b = Manifest::read(f.root / "fab2" / "manifest.jsonl");
    REQUIRE(a.size() == 5);
    for (size_t n = 0; n < a.size(); ++n) {
      CHECK(slurp(a.path(n, "image")) == slurp(b.path(n, "image")));
      const auto img = load_volume(a.path(n, "image"));
      const auto mask = load_mask(a.path(n, "mask"));
      CHECK(mask.tumor_voxels() >= 16);
      for (float x : img.data()) REQUIRE((x >= -1.0f && x <= 1.0f));
      CHECK(a.records()[n]["provenance"].contains("healthy_id"));
    }
    CHECK_THROWS_AS(cmd_fabricate(f.at("bad"), f.healthy, f.tumor, -1, std::nullopt), ValidationError);
  }

  TEST_CASE("train, refine and evaluate compose") {
    Fixture f;
    cmd_fabricate(f.at("fab"), f.healthy, f.tumor, 2, std::nullopt);
    const auto coarse = f.root / "fab" / "manifest.jsonl";
    const auto tr = cmd_train_refiner(f.at("train"), coarse, f.tumor, std::nullopt);
    CHECK(tr.summary["extractor_checksum_before"] == tr.summary["extractor_checksum_after"]);
    const fs::path ckpt = tr.summary["final_checkpoint"].get<std::string>();
    REQUIRE(fs::exists(ckpt));

    auto mismatched = f.at("train2");
    mismatched.stage2.train.epochs = 3;
    CHECK_THROWS_AS(cmd_train_refiner(mismatched, coarse, f.tumor, ckpt), ValidationError);

    cmd_refine(f.at("refine"), ckpt, coarse);
    const auto refined = Manifest::read(f.root / "refine" / "manifest.jsonl");
    REQUIRE(refined.size() == 2);
    const auto first = load_volume(refined.path(0, "image"));
    for (float x : first.data()) REQUIRE((x >= -1.0f && x <= 1.0f));

    const auto ev = cmd_evaluate(f.at("eval"), {f.root / "refine" / "manifest.jsonl"}, coarse, {});
    CHECK(ev.summary["table"][0]["Mean"]["mean"] == 1.0);
    CHECK(fs::exists(f.root / "eval" / "report.json"));
  }

  TEST_CASE("evaluate reports the test across runs and rejects unmatched cases") {
    Fixture f;
    const auto r = cmd_evaluate(f.at("ev"), {f.tumor, f.tumor}, f.tumor, {f.tumor, f.tumor});
    const auto& row = r.summary["table"][0];
    CHECK(row["Mean Diff"] == 0.0);
    CHECK(row["p-value"] == 1.0);
    const auto single = cmd_evaluate(f.at("ev1"), {f.tumor}, f.tumor, {f.tumor});
    CHECK(single.summary["table"][0]["p-value"].is_null());
    CHECK(single.warnings.size() == 1);
    CHECK_THROWS_AS(cmd_evaluate(f.at("ev2"), {f.tumor}, f.healthy, {}), ValidationError);
  }

  TEST_CASE("manifest paths are stored relative and resolved on read") {
    const auto dir = temp_dir("man");
    Manifest m;
    m.add(Json{{"id", "a"}, {"image", (dir / "sub" / "a.nii.gz").string()}});
    m.write(dir / "m.jsonl");
    CHECK(slurp(dir / "m.jsonl").find("sub/a.nii.gz") != std::string::npos);
    CHECK(slurp(dir / "m.jsonl").find(dir.string()) == std::string::npos);
    const auto back = Manifest::read(dir / "m.jsonl");
    CHECK(back.path(0, "image") == dir / "sub" / "a.nii.gz");
    CHECK_THROWS_AS(back.path(0, "mask"), ValidationError);
    CHECK_THROWS_AS(Manifest::read(dir / "none.jsonl"), IoError);
  }
}
