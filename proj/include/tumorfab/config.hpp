#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/feature_net.hpp"
#include "tumorfab/intensity_fit.hpp"
#include "tumorfab/mask_forge.hpp"
#include "tumorfab/phantom.hpp"
#include "tumorfab/refiner_train.hpp"
#include "tumorfab/sliding_window.hpp"

namespace tumorfab {

using Json = nlohmann::ordered_json;

struct DataConfig {
  double target_spacing_mm = 1.0;
  /// "warn" or "fail" when an input looks like it still has a skull.
  std::string skull_strip_check = "warn";
  /// Companion label files are named <stem><mask_suffix>.nii[.gz].
  std::string mask_suffix = "_seg";
};

struct ExtractorConfig {
  /// Empty: use the fixed-seed random encoder.
  std::string checkpoint_path;
  uint64_t fallback_random_seed = 1234;
  std::vector<int> layers_for_percep{0, 1, 2};
  ExtractorSpec spec{};
};

struct Stage1Config {
  Stage1FitConfig fit{};
  double sigma = kRoiBlurSigma;
  /// Coarse samples fabricated for fitting; 0 means one per real tumor case.
  int64_t samples = 0;
};

struct Stage2Config {
  TrainConfig train{};
  WindowSpec window{};
};

struct EvalConfig {
  double significance = 0.05;
};

struct PhantomConfig {
  PhantomSpec spec{};
  int64_t healthy = 8;
  int64_t tumor = 8;
};

struct PipelineConfig {
  DataConfig data;
  MaskAugmentConfig mask_augment;
  Stage1Config stage1;
  ExtractorConfig extractor;
  Stage2Config stage2;
  EvalConfig eval;
  PhantomConfig phantom;
  uint64_t seed = 0;
  std::string out_dir = "out";

  /// Copies the global seed into every section (each gets its own derived
  /// stream) and the extractor's perceptual layers into the training config.
  void resolve();
  void validate() const;
};

Json to_json(const PipelineConfig& config);
/// Strict: unknown keys anywhere raise ValidationError naming the dotted path.
PipelineConfig config_from_json(const Json& json);

/// Applies "dotted.key=value". The value is parsed as JSON when possible and
/// taken as a plain string otherwise. The key must already exist.
void apply_override(Json& json, const std::string& assignment);

/// Defaults, then the file (if any), then overrides, then resolve() + validate().
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                           std::optional<uint64_t> seed = std::nullopt, std::optional<std::string> out_dir = std::nullopt);

Json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& json);

Json transform_to_json(const IntensityTransform& t);
IntensityTransform transform_from_json(const Json& json);

/// FNV-1a 64 over a byte string.
uint64_t fnv1a(std::string_view bytes);
std::string hex64(uint64_t v);

}  // namespace tumorfab
