#include "tumorfab/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/eval_metrics.hpp"
#include "tumorfab/intensity_fit.hpp"
#include "tumorfab/manifest.hpp"
#include "tumorfab/mask_forge.hpp"
#include "tumorfab/nifti_io.hpp"
#include "tumorfab/phantom.hpp"
#include "tumorfab/preprocess.hpp"
#include "tumorfab/refiner_train.hpp"
#include "tumorfab/rng.hpp"
#include "tumorfab/sliding_window.hpp"

namespace tumorfab {
namespace fs = std::filesystem;
namespace {

// Stream tags for per-sample RNG derivation.
enum : uint64_t { kHealthyPhantom = 0, kTumorPhantom = 1, kFitMasks = 7, kFabricate = 8 };

fs::path out_dir(const PipelineConfig& c) { return fs::path(c.out_dir); }

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("not valid JSON: " + path.string());
  return j;
}

std::string numbered(const char* prefix, int64_t n, int width = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%0*lld", prefix, width, static_cast<long long>(n));
  return buf;
}

bool is_nifti(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.ends_with(".nii") || name.ends_with(".nii.gz");
}

std::string nifti_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* ext : {".nii.gz", ".nii"})
    if (name.ends_with(ext)) return name.substr(0, name.size() - std::strlen(ext));
  return name;
}

SegMask brain_as_mask(const BrainMask& brain, const Geometry& geometry) {
  SegMask m(brain.dims(), geometry);
  m.labels() = brain.values();
  return m;
}

BrainMask load_brain(const fs::path& path) {
  const SegMask m = load_mask(path);
  BrainMask b(m.dims());
  for (size_t n = 0; n < m.labels().size(); ++n) b.values()[n] = m.labels()[n] != 0 ? 1 : 0;
  return b;
}

struct HealthyCase {
  std::string id;
  MriVolume image;
  BrainMask brain;
  fs::path brain_path;
};

std::vector<HealthyCase> load_healthy(const fs::path& manifest_path) {
  const auto manifest = Manifest::read(manifest_path);
  if (manifest.empty()) throw ValidationError("healthy manifest is empty: " + manifest_path.string());
  std::vector<HealthyCase> out;
  for (size_t n = 0; n < manifest.size(); ++n) {
    HealthyCase h;
    h.id = manifest.id(n);
    h.image = load_volume(manifest.path(n, "image"));
    if (manifest.has(n, "brain")) {
      h.brain_path = manifest.path(n, "brain");
      h.brain = load_brain(h.brain_path);
    } else {
      h.brain = compute_brain_mask(h.image);
    }
    require_same_dims(h.image.dims(), h.brain.dims(), "healthy image / brain mask");
    out.push_back(std::move(h));
  }
  return out;
}

struct LabeledSet {
  std::vector<std::string> ids;
  std::vector<LabeledVolume> cases;
  std::vector<fs::path> mask_paths;
  std::vector<std::optional<fs::path>> brain_paths;
};

LabeledSet load_labeled(const fs::path& manifest_path, const char* what) {
  const auto manifest = Manifest::read(manifest_path);
  if (manifest.empty()) throw ValidationError(std::string(what) + " manifest is empty: " + manifest_path.string());
  LabeledSet out;
  for (size_t n = 0; n < manifest.size(); ++n) {
    LabeledVolume v{load_volume(manifest.path(n, "image")), load_mask(manifest.path(n, "mask"))};
    require_same_dims(v.image.dims(), v.mask.dims(), what);
    out.ids.push_back(manifest.id(n));
    out.mask_paths.push_back(manifest.path(n, "mask"));
    out.brain_paths.push_back(manifest.has(n, "brain") ? std::optional(manifest.path(n, "brain")) : std::nullopt);
    out.cases.push_back(std::move(v));
  }
  return out;
}

void require_common_grid(const std::vector<HealthyCase>& healthy, const LabeledSet& tumors) {
  const Dims3 d = healthy.front().image.dims();
  for (const auto& h : healthy)
    if (h.image.dims() != d) throw ValidationError("healthy volumes must share one grid; found " + to_string(h.image.dims()) + " and " + to_string(d));
  for (const auto& t : tumors.cases)
    if (t.image.dims() != d)
      throw ValidationError("tumor cases must share the healthy grid " + to_string(d) + ", found " + to_string(t.image.dims()));
}

std::vector<SegMask> mask_pool(const LabeledSet& tumors) {
  std::vector<SegMask> pool;
  for (const auto& c : tumors.cases) {
    if (c.mask.tumor_voxels() == 0) continue;
    pool.push_back(c.mask);
  }
  if (pool.empty()) throw ValidationError("tumor manifest contains no nonempty masks");
  return pool;
}

Stage1FitResult fit_transform(const PipelineConfig& config, const std::vector<HealthyCase>& healthy,
                              const LabeledSet& tumors, const FeatureExtractor& extractor) {
  const auto pool = mask_pool(tumors);
  const int64_t samples = config.stage1.samples > 0 ? config.stage1.samples : static_cast<int64_t>(tumors.cases.size());
  std::vector<Stage1Sample> coarse;
  for (int64_t k = 0; k < samples; ++k) {
    const auto& h = healthy[static_cast<size_t>(k) % healthy.size()];
    Rng rng(derive_seed(config.mask_augment.seed, {kFitMasks, static_cast<uint64_t>(k)}));
    const auto sampled = sample_synthetic_mask(pool, h.brain, config.mask_augment, rng);
    coarse.push_back(make_stage1_sample(h.image, sampled.mask, config.stage1.sigma));
  }
  return fit_intensity_params(coarse, tumors.cases, extractor, config.stage1.fit);
}

Json fit_record(const PipelineConfig& config, const Stage1FitResult& fit, const FeatureExtractor& extractor) {
  return Json{{"transform", transform_to_json(fit.transform)},
              {"loss_history", fit.loss_history},
              {"pooling", config.stage1.fit.pooling},
              {"extractor_checksum", hex64(extractor.checksum())}};
}

void check_range(const MriVolume& v, const std::string& what) {
  for (float x : v.data())
    if (!(x >= -1.0f && x <= 1.0f)) throw Error(what + " has a voxel outside [-1, 1]");
}

}  // namespace

FeatureExtractor make_extractor(const ExtractorConfig& config) {
  if (!config.checkpoint_path.empty()) return FeatureExtractor::load(config.checkpoint_path);
  return FeatureExtractor::random(config.spec, config.fallback_random_seed);
}

void write_resolved_config(const PipelineConfig& config) {
  fs::create_directories(out_dir(config));
  write_json(out_dir(config) / "resolved_config.json", to_json(config));
}

CommandResult cmd_phantom(const PipelineConfig& config) {
  write_resolved_config(config);
  const fs::path out = out_dir(config);
  fs::create_directories(out / "healthy");
  fs::create_directories(out / "tumor");
  const PhantomSpec& base = config.phantom.spec;
  Manifest fixtures;
  for (int64_t k = 0; k < config.phantom.healthy; ++k) {
    const auto spec = jittered_spec(base, derive_seed(base.seed, {kHealthyPhantom, static_cast<uint64_t>(k)}));
    const std::string id = numbered("healthy", k, 3);
    const fs::path image = out / "healthy" / (id + ".nii.gz");
    save_volume(generate_phantom_brain(spec), image);
    fixtures.add(Json{{"id", id}, {"kind", "healthy"}, {"seed", spec.seed}, {"spec_hash", hex64(spec.hash())},
                      {"image", fs::absolute(image).string()}});
  }
  for (int64_t k = 0; k < config.phantom.tumor; ++k) {
    const auto spec = jittered_spec(base, derive_seed(base.seed, {kTumorPhantom, static_cast<uint64_t>(k)}));
    const std::string id = numbered("tumor", k, 3);
    const auto pair = generate_phantom_tumor_case(spec);
    const fs::path image = out / "tumor" / (id + ".nii.gz");
    const fs::path mask = out / "tumor" / (id + config.data.mask_suffix + ".nii.gz");
    save_volume(pair.image, image);
    save_mask(pair.mask, mask);
    fixtures.add(Json{{"id", id}, {"kind", "tumor"}, {"seed", spec.seed}, {"spec_hash", hex64(spec.hash())},
                      {"image", fs::absolute(image).string()}, {"mask", fs::absolute(mask).string()}});
  }
  fixtures.write(out / "fixtures.jsonl");
  CommandResult r;
  r.summary = Json{{"healthy", config.phantom.healthy}, {"tumor", config.phantom.tumor},
                   {"manifest", (out / "fixtures.jsonl").string()}};
  return r;
}

CommandResult cmd_preprocess(const PipelineConfig& config, const fs::path& input_dir) {
  if (!fs::is_directory(input_dir)) throw IoError("input directory does not exist: " + input_dir.string());
  const std::string& suffix = config.data.mask_suffix;
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (!entry.is_regular_file() || !is_nifti(entry.path())) continue;
    const std::string stem = nifti_stem(entry.path());
    if (stem.ends_with(suffix) || stem.ends_with("_brain")) continue;
    inputs.push_back(entry.path());
  }
  if (inputs.empty()) throw ValidationError("no NIfTI volumes found in " + input_dir.string());
  std::sort(inputs.begin(), inputs.end());

  write_resolved_config(config);
  const fs::path out = out_dir(config);
  CommandResult r;
  Manifest manifest;
  int64_t masks = 0;
  for (const auto& path : inputs) {
    const std::string stem = nifti_stem(path);
    const MriVolume raw = load_volume(path);
    const bool suspicious = has_nonzero_corners(raw);
    if (suspicious) {
      const std::string msg = path.string() + " has nonzero corner voxels and may not be skull-stripped";
      if (config.data.skull_strip_check == "fail") throw ValidationError(msg);
      r.warnings.push_back(msg);
    }
    const MriVolume resampled = resample_isotropic(raw, config.data.target_spacing_mm);
    const BrainMask brain = compute_brain_mask(resampled, 0.0f);
    const MriVolume normalized = normalize_intensity(resampled);

    const fs::path image_out = out / (stem + ".nii.gz");
    const fs::path brain_out = out / (stem + "_brain.nii.gz");
    save_volume(normalized, image_out);
    save_mask(brain_as_mask(brain, normalized.geometry()), brain_out);
    Json rec{{"id", stem}, {"image", fs::absolute(image_out).string()}, {"brain", fs::absolute(brain_out).string()}};

    for (const char* ext : {".nii.gz", ".nii"}) {
      const fs::path companion = input_dir / (stem + suffix + ext);
      if (!fs::exists(companion)) continue;
      const SegMask mask = load_mask(companion);
      require_same_dims(raw.dims(), mask.dims(), "label file");
      const fs::path mask_out = out / (stem + suffix + ".nii.gz");
      save_mask(resample_mask(mask, config.data.target_spacing_mm), mask_out);
      rec["mask"] = fs::absolute(mask_out).string();
      ++masks;
      break;
    }
    rec["skull_strip_warning"] = suspicious;
    rec["source"] = path.filename().string();
    manifest.add(std::move(rec));
  }
  const fs::path manifest_path = out / "manifest.jsonl";
  manifest.write(manifest_path);
  r.summary = Json{{"volumes", manifest.size()}, {"masks", masks}, {"warnings", r.warnings.size()},
                   {"manifest", manifest_path.string()}, {"manifest_hash", file_hash(manifest_path)}};
  return r;
}

CommandResult cmd_fit_intensity(const PipelineConfig& config, const fs::path& healthy_manifest,
                                const fs::path& tumor_manifest) {
  const auto healthy = load_healthy(healthy_manifest);
  const auto tumors = load_labeled(tumor_manifest, "tumor");
  require_common_grid(healthy, tumors);
  write_resolved_config(config);
  const auto extractor = make_extractor(config.extractor);
  const auto fit = fit_transform(config, healthy, tumors, extractor);
  const fs::path path = out_dir(config) / "transform.json";
  write_json(path, fit_record(config, fit, extractor));
  CommandResult r;
  r.summary = Json{{"transform", transform_to_json(fit.transform)},
                   {"initial_loss", fit.loss_history.front()},
                   {"final_loss", fit.loss_history.back()},
                   {"path", path.string()}};
  return r;
}

CommandResult cmd_fabricate(const PipelineConfig& config, const fs::path& healthy_manifest,
                            const fs::path& tumor_manifest, int64_t count,
                            const std::optional<fs::path>& transform_path) {
  if (count < 0) throw ValidationError("fabricate count must be >= 0");
  write_resolved_config(config);
  const fs::path out = out_dir(config);
  CommandResult r;
  Manifest manifest;
  if (count == 0) {
    manifest.write(out / "manifest.jsonl");
    r.summary = Json{{"count", 0}, {"manifest", (out / "manifest.jsonl").string()}};
    return r;
  }

  const auto healthy = load_healthy(healthy_manifest);
  const auto tumors = load_labeled(tumor_manifest, "tumor");
  require_common_grid(healthy, tumors);

  IntensityTransform transform;
  if (transform_path) {
    const Json j = read_json(*transform_path);
    transform = transform_from_json(j.contains("transform") ? j["transform"] : j);
  } else {
    const auto extractor = make_extractor(config.extractor);
    const auto fit = fit_transform(config, healthy, tumors, extractor);
    write_json(out / "transform.json", fit_record(config, fit, extractor));
    transform = fit.transform;
    r.warnings.push_back("no transform given; fitted one and saved it to " + (out / "transform.json").string());
  }

  std::vector<SegMask> pool;
  std::vector<std::string> pool_ids;
  for (size_t n = 0; n < tumors.cases.size(); ++n)
    if (tumors.cases[n].mask.tumor_voxels() > 0) {
      pool.push_back(tumors.cases[n].mask);
      pool_ids.push_back(tumors.ids[n]);
    }
  if (pool.empty()) throw ValidationError("tumor manifest contains no nonempty masks");

  for (int64_t k = 0; k < count; ++k) {
    Rng rng(derive_seed(config.mask_augment.seed, {kFabricate, static_cast<uint64_t>(k)}));
    const auto& h = healthy[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(healthy.size()) - 1))];
    const auto sampled = sample_synthetic_mask(pool, h.brain, config.mask_augment, rng);
    const auto pair = fabricate_coarse(h.image, sampled.mask, transform, config.stage1.sigma);
    check_range(pair.image, "fabricated volume");
    validate_labels(pair.mask);
    for (size_t n = 0; n < pair.mask.labels().size(); ++n)
      if (pair.mask.labels()[n] != 0 && !h.brain.values()[n]) throw Error("fabricated mask leaves the brain");

    const std::string id = numbered("coarse", k);
    const fs::path image = out / (id + ".nii.gz");
    const fs::path mask = out / (id + config.data.mask_suffix + ".nii.gz");
    save_volume(pair.image, image);
    save_mask(pair.mask, mask);
    const auto& p = sampled.provenance;
    Json prov{{"healthy_id", h.id},
              {"primary_mask_id", pool_ids[p.primary_index]},
              {"primary_scale", p.primary_scale},
              {"primary_shift", p.primary_shift},
              {"secondary_mask_id", p.secondary_index ? Json(pool_ids[*p.secondary_index]) : Json(nullptr)},
              {"attempts", p.attempts},
              {"transform", transform_to_json(transform)},
              {"sigma", config.stage1.sigma}};
    if (p.secondary_index) {
      prov["secondary_scale"] = p.secondary_scale;
      prov["secondary_shift"] = p.secondary_shift;
    }
    Json rec{{"id", id}, {"image", fs::absolute(image).string()}, {"mask", fs::absolute(mask).string()}};
    if (!h.brain_path.empty()) rec["brain"] = fs::absolute(h.brain_path).string();
    rec["provenance"] = std::move(prov);
    manifest.add(std::move(rec));
  }
  manifest.write(out / "manifest.jsonl");
  r.summary = Json{{"count", count}, {"transform", transform_to_json(transform)},
                   {"manifest", (out / "manifest.jsonl").string()}};
  return r;
}

CommandResult cmd_train_refiner(const PipelineConfig& config, const fs::path& coarse_manifest,
                                const fs::path& real_manifest, const std::optional<fs::path>& resume) {
  const auto coarse = load_labeled(coarse_manifest, "coarse");
  const auto real = load_labeled(real_manifest, "real");
  write_resolved_config(config);
  const fs::path out = out_dir(config);
  fs::create_directories(out / "checkpoints");

  const auto extractor = make_extractor(config.extractor);
  const uint64_t before = extractor.checksum();

  Refiner refiner = resume ? Refiner::load(*resume) : Refiner(config.stage2.train);
  if (resume && refiner.config_fingerprint() != config.stage2.train.fingerprint())
    throw ValidationError("checkpoint " + resume->string() + " was trained with a different stage2 configuration");

  std::ofstream log(out / "train_log.jsonl");
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
  std::vector<std::string> checkpoints;
  TrainCallbacks callbacks;
  callbacks.on_step = [&](const StepLog& s) {
    log << Json{{"step", s.step},         {"epoch", s.epoch},   {"d_patch", s.d_patch},   {"d_global", s.d_global},
                {"g_patch", s.g_patch},   {"g_global", s.g_global}, {"hinge", s.hinge},   {"percep", s.percep},
                {"lambda_c", s.lambda_c}, {"lr_g", s.lr_g},     {"lr_d", s.lr_d}}
               .dump()
        << '\n';
  };
  callbacks.on_epoch = [&](const Refiner& rf) {
    const fs::path path = out / "checkpoints" / (numbered("epoch", rf.epochs_completed()) + ".ckpt");
    rf.save(path);
    checkpoints.push_back(path.string());
    log.flush();
  };
  train_refiner(refiner, coarse.cases, real.cases, extractor, callbacks);
  log.close();

  const uint64_t after = extractor.checksum();
  if (after != before) throw Error("frozen extractor weights changed during training");

  CommandResult r;
  r.summary = Json{{"epochs_completed", refiner.epochs_completed()},
                   {"steps", refiner.steps_completed()},
                   {"checkpoints", checkpoints},
                   {"final_checkpoint", checkpoints.empty() ? Json(nullptr) : Json(checkpoints.back())},
                   {"extractor_checksum_before", hex64(before)},
                   {"extractor_checksum_after", hex64(after)},
                   {"log", (out / "train_log.jsonl").string()}};
  write_json(out / "train_summary.json", r.summary);
  return r;
}

CommandResult cmd_refine(const PipelineConfig& config, const fs::path& checkpoint, const fs::path& coarse_manifest) {
  const Refiner refiner = Refiner::load(checkpoint);
  const auto coarse = load_labeled(coarse_manifest, "coarse");
  write_resolved_config(config);
  const fs::path out = out_dir(config);
  Manifest manifest;
  float lo = 1.0f, hi = -1.0f;
  for (size_t n = 0; n < coarse.cases.size(); ++n) {
    const auto& c = coarse.cases[n];
    const BrainMask brain = coarse.brain_paths[n] ? load_brain(*coarse.brain_paths[n]) : compute_brain_mask(c.image);
    const MriVolume refined = refine_volume(c.image, c.mask, refiner, config.stage2.window, brain);
    check_range(refined, "refined volume");
    for (float v : refined.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const fs::path image = out / ("refined_" + coarse.ids[n] + ".nii.gz");
    save_volume(refined, image);
    Json rec{{"id", coarse.ids[n]}, {"image", fs::absolute(image).string()},
             {"mask", fs::absolute(coarse.mask_paths[n]).string()}};
    if (coarse.brain_paths[n]) rec["brain"] = fs::absolute(*coarse.brain_paths[n]).string();
    manifest.add(std::move(rec));
  }
  manifest.write(out / "manifest.jsonl");
  CommandResult r;
  r.summary = Json{{"count", manifest.size()}, {"min", lo}, {"max", hi}, {"checkpoint", checkpoint.string()},
                   {"manifest", (out / "manifest.jsonl").string()}};
  return r;
}

namespace {

struct RunScores {
  std::string manifest;
  std::vector<std::pair<std::string, DiceScores>> cases;
  DiceScores mean;
};

RunScores score_run(const fs::path& pred_manifest, const std::map<std::string, fs::path>& gt) {
  const auto manifest = Manifest::read(pred_manifest);
  if (manifest.empty()) throw ValidationError("prediction manifest is empty: " + pred_manifest.string());
  RunScores run;
  run.manifest = pred_manifest.string();
  for (size_t n = 0; n < manifest.size(); ++n) {
    const std::string id = manifest.id(n);
    const auto it = gt.find(id);
    if (it == gt.end()) throw ValidationError("case '" + id + "' of " + pred_manifest.string() + " has no ground truth");
    const auto s = mean_dice(load_mask(manifest.path(n, "mask")), load_mask(it->second));
    run.cases.emplace_back(id, s);
    run.mean.et += s.et;
    run.mean.tc += s.tc;
    run.mean.wt += s.wt;
    run.mean.mean += s.mean;
  }
  const double k = static_cast<double>(run.cases.size());
  run.mean = {run.mean.et / k, run.mean.tc / k, run.mean.wt / k, run.mean.mean / k};
  return run;
}

Json run_json(const RunScores& run) {
  Json cases = Json::array();
  for (const auto& [id, s] : run.cases) cases.push_back(Json{{"id", id}, {"ET", s.et}, {"TC", s.tc}, {"WT", s.wt}, {"Mean", s.mean}});
  return Json{{"manifest", run.manifest},
              {"ET", run.mean.et}, {"TC", run.mean.tc}, {"WT", run.mean.wt}, {"Mean", run.mean.mean},
              {"cases", cases}};
}

Json summary_row(const std::string& name, const std::vector<RunScores>& runs) {
  const auto column = [&](double DiceScores::*field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.mean.*field);
    const auto s = runs.size() > 1 ? summarize(v) : SampleSummary{v.front(), 0.0};
    return Json{{"mean", s.mean}, {"sd", s.stddev}};
  };
  return Json{{"method", name},
              {"runs", runs.size()},
              {"ET", column(&DiceScores::et)},
              {"TC", column(&DiceScores::tc)},
              {"WT", column(&DiceScores::wt)},
              {"Mean", column(&DiceScores::mean)}};
}

}  // namespace

CommandResult cmd_evaluate(const PipelineConfig& config, const std::vector<fs::path>& pred_manifests,
                           const fs::path& gt_manifest, const std::vector<fs::path>& baseline_manifests) {
  if (pred_manifests.empty()) throw ValidationError("evaluate needs at least one --pred manifest");
  const auto gt_records = Manifest::read(gt_manifest);
  if (gt_records.empty()) throw ValidationError("ground-truth manifest is empty: " + gt_manifest.string());
  std::map<std::string, fs::path> gt;
  for (size_t n = 0; n < gt_records.size(); ++n) gt[gt_records.id(n)] = gt_records.path(n, "mask");
  write_resolved_config(config);

  CommandResult r;
  std::vector<RunScores> method, baseline;
  for (const auto& p : pred_manifests) method.push_back(score_run(p, gt));
  for (const auto& p : baseline_manifests) baseline.push_back(score_run(p, gt));

  Json table = Json::array();
  Json row = summary_row("method", method);
  if (!baseline.empty()) {
    std::vector<double> a, b;
    for (const auto& x : method) a.push_back(x.mean.mean);
    for (const auto& x : baseline) b.push_back(x.mean.mean);
    const double diff = row["Mean"]["mean"].get<double>() - summary_row("baseline", baseline)["Mean"]["mean"].get<double>();
    row["Mean Diff"] = diff;
    if (a.size() >= 2 && b.size() >= 2) {
      const auto t = two_tailed_t_test(a, b);
      row["p-value"] = t.p_value;
      row["t"] = t.t_statistic;
      row["degenerate"] = t.degenerate;
      row["significant"] = t.p_value < config.eval.significance;
    } else {
      row["p-value"] = nullptr;
      r.warnings.push_back("the t-test needs at least two runs per method; p-value omitted");
    }
  }
  table.push_back(row);
  if (!baseline.empty()) table.push_back(summary_row("baseline", baseline));

  Json runs = Json::array(), base_runs = Json::array();
  for (const auto& x : method) runs.push_back(run_json(x));
  for (const auto& x : baseline) base_runs.push_back(run_json(x));
  Json report{{"header",
               {{"metric", "Dice, as a fraction in [0, 1]"},
                {"regions", {{"ET", {3}}, {"TC", {1, 3}}, {"WT", {1, 2, 3}}}},
                {"empty_convention", "both empty scores 1"},
                {"test", "two-tailed Welch t-test (unpaired, unequal variances) on per-run mean Dice"},
                {"significance", config.eval.significance},
                {"ground_truth", gt_manifest.string()}}},
              {"table", table},
              {"runs", runs},
              {"baseline_runs", base_runs}};
  const fs::path path = out_dir(config) / "report.json";
  write_json(path, report);
  r.summary = Json{{"report", path.string()}, {"table", table}};
  return r;
}

}  // namespace tumorfab
