#include "tumorfab/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "tumorfab/error.hpp"
#include "tumorfab/rng.hpp"

namespace tumorfab {
namespace {

// Reads known keys from one JSON object and rejects anything else.
class Section {
 public:
  Section(const Json& json, std::string path) : json_(json), path_(std::move(path)) {
    if (!json_.is_object()) throw ValidationError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& dst) {
    seen_.insert(key);
    if (!json_.contains(key)) return;
    try {
      dst = json_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ValidationError("config key '" + dotted(key) + "': " + e.what());
    }
  }

  void get_dims(const std::string& key, Dims3& dst) {
    std::array<int64_t, 3> v{dst.h, dst.w, dst.d};
    get(key, v);
    dst = {v[0], v[1], v[2]};
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(json_.contains(key) ? json_.at(key) : Json::object(), dotted(key));
  }

  bool has(const std::string& key) const { return json_.contains(key); }

  void finish() const {
    for (const auto& item : json_.items())
      if (!seen_.count(item.key())) throw ValidationError("unknown config key '" + dotted(item.key()) + "'");
  }

 private:
  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  Json json_;
  std::string path_;
  std::set<std::string> seen_;
};

Json dims_json(const Dims3& d) { return Json::array({d.h, d.w, d.d}); }

Json generator_json(int64_t image_channels, int64_t base, int64_t max) {
  return Json{{"image_channels", image_channels}, {"base_channels", base}, {"max_channels", max}};
}

void read_train(Section& s, TrainConfig& t, bool resolved_keys) {
  s.get("epochs", t.epochs);
  s.get("lr_generator", t.lr_generator);
  s.get("lr_discriminator", t.lr_discriminator);
  std::array<double, 2> betas{t.beta1, t.beta2};
  s.get("adam_betas", betas);
  t.beta1 = betas[0];
  t.beta2 = betas[1];
  s.get("adam_eps", t.adam_eps);
  s.get_dims("crop_size", t.crop);
  s.get("batch_size", t.batch_size);
  s.get("flip_augment", t.flip_augment);
  if (resolved_keys) {
    s.get("seed", t.seed);
    s.get("percep_layers", t.percep_layers);
  }
  auto g = s.sub("generator");
  g.get("image_channels", t.generator.image_channels);
  g.get("base_channels", t.generator.base_channels);
  g.get("max_channels", t.generator.max_channels);
  g.finish();
  auto d = s.sub("discriminator");
  d.get("image_channels", t.discriminator.image_channels);
  d.get("base_channels", t.discriminator.base_channels);
  d.get("max_channels", t.discriminator.max_channels);
  d.finish();
  auto w = s.sub("loss");
  w.get("lambda_a", t.weights.patch_adversarial);
  w.get("lambda_b", t.weights.global_adversarial);
  w.get("lambda_c_start", t.weights.hinge_start);
  w.get("lambda_c_end", t.weights.hinge_end);
  w.get("lambda_d", t.weights.perceptual);
  w.get("margin", t.weights.margin);
  w.finish();
}

}  // namespace

uint64_t fnv1a(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json train_config_to_json(const TrainConfig& t) {
  Json j;
  j["epochs"] = t.epochs;
  j["lr_generator"] = t.lr_generator;
  j["lr_discriminator"] = t.lr_discriminator;
  j["adam_betas"] = {t.beta1, t.beta2};
  j["adam_eps"] = t.adam_eps;
  j["crop_size"] = dims_json(t.crop);
  j["batch_size"] = t.batch_size;
  j["flip_augment"] = t.flip_augment;
  j["seed"] = t.seed;
  j["percep_layers"] = t.percep_layers;
  j["generator"] = generator_json(t.generator.image_channels, t.generator.base_channels, t.generator.max_channels);
  j["discriminator"] =
      generator_json(t.discriminator.image_channels, t.discriminator.base_channels, t.discriminator.max_channels);
  j["loss"] = Json{{"lambda_a", t.weights.patch_adversarial},    {"lambda_b", t.weights.global_adversarial},
                   {"lambda_c_start", t.weights.hinge_start},     {"lambda_c_end", t.weights.hinge_end},
                   {"lambda_d", t.weights.perceptual},            {"margin", t.weights.margin}};
  return j;
}

TrainConfig train_config_from_json(const Json& json) {
  TrainConfig t;
  Section s(json, "stage2");
  read_train(s, t, true);
  s.finish();
  return t;
}

Json transform_to_json(const IntensityTransform& t) {
  Json j;
  for (Label c : kTumorClasses) j[label_name(c)] = Json{{"gain", t[c].gain}, {"offset", t[c].offset}};
  return j;
}

IntensityTransform transform_from_json(const Json& json) {
  IntensityTransform t;
  Section s(json, "transform");
  for (Label c : kTumorClasses) {
    if (!s.has(label_name(c))) throw ValidationError(std::string("intensity transform lacks class ") + label_name(c));
    auto cls = s.sub(label_name(c));
    cls.get("gain", t[c].gain);
    cls.get("offset", t[c].offset);
    cls.finish();
  }
  s.finish();
  t.validate();
  return t;
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["data"] = Json{{"target_spacing_mm", c.data.target_spacing_mm},
                   {"skull_strip_check", c.data.skull_strip_check},
                   {"mask_suffix", c.data.mask_suffix}};
  const auto& m = c.mask_augment;
  j["mask_augment"] = Json{{"scale_range", {m.scale_min, m.scale_max}},
                           {"shift_range_mm", m.shift_range_mm},
                           {"combine_probability", m.combine_probability},
                           {"min_tumor_voxels", m.min_tumor_voxels},
                           {"max_attempts", m.max_attempts}};
  const auto& f = c.stage1.fit;
  j["stage1"] = Json{{"epochs", f.epochs},
                     {"learning_rate", f.learning_rate},
                     {"optimizer", f.optimizer},
                     {"momentum", f.momentum},
                     {"batch_size", f.batch_size},
                     {"pooling", f.pooling},
                     {"class_layers", f.class_layers},
                     {"feature_level", f.feature_level},
                     {"sigma", c.stage1.sigma},
                     {"samples", c.stage1.samples}};
  j["extractor"] = Json{{"checkpoint_path", c.extractor.checkpoint_path},
                        {"fallback_random_seed", c.extractor.fallback_random_seed},
                        {"layers_for_percep", c.extractor.layers_for_percep},
                        {"in_channels", c.extractor.spec.in_channels},
                        {"widths", c.extractor.spec.widths}};
  Json s2 = train_config_to_json(c.stage2.train);
  s2.erase("seed");
  s2.erase("percep_layers");
  s2["window"] = Json{{"size", dims_json(c.stage2.window.window)}, {"overlap", c.stage2.window.overlap}};
  j["stage2"] = s2;
  j["eval"] = Json{{"significance", c.eval.significance}};
  const auto& p = c.phantom.spec;
  j["phantom"] = Json{{"dims", dims_json(p.dims)},
                      {"spacing_mm", p.spacing_mm},
                      {"brain_axes_mm", p.brain_axes_mm},
                      {"base_intensity", p.base_intensity},
                      {"texture_amplitude", p.texture_amplitude},
                      {"texture_scale", p.texture_scale},
                      {"noise_sigma", p.noise_sigma},
                      {"tumor",
                       {{"center_offset_mm", p.tumor.center_offset_mm},
                        {"ed_radii_mm", p.tumor.ed_radii_mm},
                        {"ncr_radii_mm", p.tumor.ncr_radii_mm},
                        {"et_radii_mm", p.tumor.et_radii_mm},
                        {"ncr_offset", p.tumor.ncr_offset},
                        {"ed_offset", p.tumor.ed_offset},
                        {"et_offset", p.tumor.et_offset}}},
                      {"healthy_count", c.phantom.healthy},
                      {"tumor_count", c.phantom.tumor}};
  return j;
}

PipelineConfig config_from_json(const Json& json) {
  PipelineConfig c;
  Section root(json, "");
  root.get("seed", c.seed);
  root.get("out_dir", c.out_dir);

  auto data = root.sub("data");
  data.get("target_spacing_mm", c.data.target_spacing_mm);
  data.get("skull_strip_check", c.data.skull_strip_check);
  data.get("mask_suffix", c.data.mask_suffix);
  data.finish();

  auto ma = root.sub("mask_augment");
  std::array<double, 2> scale{c.mask_augment.scale_min, c.mask_augment.scale_max};
  ma.get("scale_range", scale);
  c.mask_augment.scale_min = scale[0];
  c.mask_augment.scale_max = scale[1];
  ma.get("shift_range_mm", c.mask_augment.shift_range_mm);
  ma.get("combine_probability", c.mask_augment.combine_probability);
  ma.get("min_tumor_voxels", c.mask_augment.min_tumor_voxels);
  ma.get("max_attempts", c.mask_augment.max_attempts);
  ma.finish();

  auto s1 = root.sub("stage1");
  auto& f = c.stage1.fit;
  s1.get("epochs", f.epochs);
  s1.get("learning_rate", f.learning_rate);
  s1.get("optimizer", f.optimizer);
  s1.get("momentum", f.momentum);
  s1.get("batch_size", f.batch_size);
  s1.get("pooling", f.pooling);
  s1.get("class_layers", f.class_layers);
  s1.get("feature_level", f.feature_level);
  s1.get("sigma", c.stage1.sigma);
  s1.get("samples", c.stage1.samples);
  s1.finish();

  auto ex = root.sub("extractor");
  ex.get("checkpoint_path", c.extractor.checkpoint_path);
  ex.get("fallback_random_seed", c.extractor.fallback_random_seed);
  ex.get("layers_for_percep", c.extractor.layers_for_percep);
  ex.get("in_channels", c.extractor.spec.in_channels);
  ex.get("widths", c.extractor.spec.widths);
  ex.finish();

  auto s2 = root.sub("stage2");
  read_train(s2, c.stage2.train, false);
  auto win = s2.sub("window");
  win.get_dims("size", c.stage2.window.window);
  win.get("overlap", c.stage2.window.overlap);
  win.finish();
  s2.finish();

  auto ev = root.sub("eval");
  ev.get("significance", c.eval.significance);
  ev.finish();

  auto ph = root.sub("phantom");
  auto& p = c.phantom.spec;
  ph.get_dims("dims", p.dims);
  ph.get("spacing_mm", p.spacing_mm);
  ph.get("brain_axes_mm", p.brain_axes_mm);
  ph.get("base_intensity", p.base_intensity);
  ph.get("texture_amplitude", p.texture_amplitude);
  ph.get("texture_scale", p.texture_scale);
  ph.get("noise_sigma", p.noise_sigma);
  auto tu = ph.sub("tumor");
  tu.get("center_offset_mm", p.tumor.center_offset_mm);
  tu.get("ed_radii_mm", p.tumor.ed_radii_mm);
  tu.get("ncr_radii_mm", p.tumor.ncr_radii_mm);
  tu.get("et_radii_mm", p.tumor.et_radii_mm);
  tu.get("ncr_offset", p.tumor.ncr_offset);
  tu.get("ed_offset", p.tumor.ed_offset);
  tu.get("et_offset", p.tumor.et_offset);
  tu.finish();
  ph.get("healthy_count", c.phantom.healthy);
  ph.get("tumor_count", c.phantom.tumor);
  ph.finish();

  root.finish();
  return c;
}

void PipelineConfig::resolve() {
  mask_augment.seed = derive_seed(seed, {1});
  stage1.fit.seed = derive_seed(seed, {2});
  stage2.train.seed = derive_seed(seed, {3});
  phantom.spec.seed = derive_seed(seed, {4});
  stage2.train.percep_layers = extractor.layers_for_percep;
}

void PipelineConfig::validate() const {
  if (!(data.target_spacing_mm > 0.0)) throw ValidationError("data.target_spacing_mm must be > 0");
  if (data.skull_strip_check != "warn" && data.skull_strip_check != "fail")
    throw ValidationError("data.skull_strip_check must be \"warn\" or \"fail\"");
  if (data.mask_suffix.empty()) throw ValidationError("data.mask_suffix must not be empty");
  mask_augment.validate();
  stage1.fit.validate();
  if (!(stage1.sigma > 0.0)) throw ValidationError("stage1.sigma must be > 0");
  if (stage1.samples < 0) throw ValidationError("stage1.samples must be >= 0");
  extractor.spec.validate();
  if (!extractor.checkpoint_path.empty() && !std::filesystem::exists(extractor.checkpoint_path))
    throw ValidationError("extractor.checkpoint_path does not exist: " + extractor.checkpoint_path);
  stage2.train.validate();
  stage2.window.validate();
  if (!(eval.significance > 0.0 && eval.significance < 1.0)) throw ValidationError("eval.significance must be in (0, 1)");
  phantom.spec.validate();
  if (phantom.healthy < 0 || phantom.tumor < 0) throw ValidationError("phantom counts must be >= 0");
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
}

void apply_override(Json& json, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like KEY=VALUE: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  Json* node = &json;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ValidationError("unknown override key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  Json parsed = Json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? Json(value) : parsed;
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                           std::optional<uint64_t> seed, std::optional<std::string> out_dir) {
  PipelineConfig base;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path.string());
    Json file = Json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ValidationError("config is not valid JSON: " + path.string());
    base = config_from_json(file);
  }
  Json merged = to_json(base);
  for (const auto& o : overrides) apply_override(merged, o);
  PipelineConfig config = config_from_json(merged);
  if (seed) config.seed = *seed;
  if (out_dir) config.out_dir = *out_dir;
  config.resolve();
  config.validate();
  return config;
}

}  // namespace tumorfab
