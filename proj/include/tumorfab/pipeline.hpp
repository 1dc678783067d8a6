#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tumorfab/config.hpp"
#include "tumorfab/feature_net.hpp"

namespace tumorfab {

/// Outcome of one pipeline command: a machine-readable summary (also printed
/// by the CLI) and any non-fatal warnings.
struct CommandResult {
  Json summary = Json::object();
  std::vector<std::string> warnings;
};

/// Loaded checkpoint when configured, else the fixed-seed random encoder.
FeatureExtractor make_extractor(const ExtractorConfig& config);

/// Writes <out>/resolved_config.json; every command calls this first.
void write_resolved_config(const PipelineConfig& config);

/// Phantom fixtures: <out>/healthy/healthy_NNN.nii.gz, <out>/tumor/tumor_NNN{,_seg}.nii.gz,
/// and <out>/fixtures.jsonl listing (kind, seed, spec hash, paths).
CommandResult cmd_phantom(const PipelineConfig& config);

/// Resamples, normalizes and derives brain masks for every NIfTI volume in
/// `input_dir`; companion label files (<stem><mask_suffix>) are resampled too.
/// Writes <out>/manifest.jsonl.
CommandResult cmd_preprocess(const PipelineConfig& config, const std::filesystem::path& input_dir);

/// Fits the global intensity transform; writes <out>/transform.json.
CommandResult cmd_fit_intensity(const PipelineConfig& config, const std::filesystem::path& healthy_manifest,
                                const std::filesystem::path& tumor_manifest);

/// Fabricates `count` coarse pairs; writes <out>/manifest.jsonl with provenance.
/// Without `transform_path` the transform is fitted first (and saved).
CommandResult cmd_fabricate(const PipelineConfig& config, const std::filesystem::path& healthy_manifest,
                            const std::filesystem::path& tumor_manifest, int64_t count,
                            const std::optional<std::filesystem::path>& transform_path);

/// Trains the refiner; writes <out>/checkpoints/epoch_NNNN.ckpt after each
/// epoch, <out>/train_log.jsonl, and <out>/train_summary.json.
CommandResult cmd_train_refiner(const PipelineConfig& config, const std::filesystem::path& coarse_manifest,
                                const std::filesystem::path& real_manifest,
                                const std::optional<std::filesystem::path>& resume);

/// Sliding-window refinement of every coarse pair; writes <out>/manifest.jsonl.
CommandResult cmd_refine(const PipelineConfig& config, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& coarse_manifest);

/// Dice report for one or more prediction runs against ground truth, with an
/// optional set of baseline runs for the significance test. Cases are matched
/// by record id. Writes <out>/report.json.
CommandResult cmd_evaluate(const PipelineConfig& config, const std::vector<std::filesystem::path>& pred_manifests,
                           const std::filesystem::path& gt_manifest,
                           const std::vector<std::filesystem::path>& baseline_manifests);

}  // namespace tumorfab
