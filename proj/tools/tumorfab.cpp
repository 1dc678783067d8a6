#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tumorfab/error.hpp"
#include "tumorfab/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tumorfab;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline configuration file (JSON)");
  cmd->add_option("--seed", c.seed, "global seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--override", c.overrides, "dotted KEY=VALUE, repeatable")->allow_extra_args(false);
}

int report_error(const std::string& command, const std::string& kind, int code, const std::string& message,
                 const std::optional<std::string>& out) {
  const Json record{{"status", "error"}, {"command", command}, {"kind", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << record.dump() << '\n';
  if (out) {
    std::error_code ec;
    fs::create_directories(*out, ec);
    std::ofstream f(fs::path(*out) / "error.json");
    if (f) f << record.dump(2) << '\n';
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tumor fabrication: coarse synthesis, adversarial refinement, evaluation"};
  app.require_subcommand(1);
  Common common;

  auto* phantom = app.add_subcommand("phantom", "write phantom healthy and tumor fixtures");
  add_common(phantom, common);

  std::string input;
  auto* preprocess = app.add_subcommand("preprocess", "resample, normalize and brain-mask a directory of volumes");
  add_common(preprocess, common);
  preprocess->add_option("--input", input, "directory of skull-stripped NIfTI volumes")->required();

  std::string healthy, tumor;
  auto* fit = app.add_subcommand("fit-intensity", "fit the per-class intensity transform");
  add_common(fit, common);
  fit->add_option("--healthy", healthy, "healthy manifest")->required();
  fit->add_option("--tumor", tumor, "tumor manifest (images with masks)")->required();

  int64_t count = 0;
  std::optional<std::string> transform;
  auto* fabricate = app.add_subcommand("fabricate", "fabricate coarse image/mask pairs");
  add_common(fabricate, common);
  fabricate->add_option("--healthy", healthy, "healthy manifest")->required();
  fabricate->add_option("--tumor", tumor, "tumor manifest (images with masks)")->required();
  fabricate->add_option("--count", count, "number of pairs")->required();
  fabricate->add_option("--transform", transform, "transform.json from fit-intensity");

  std::string coarse, real;
  std::optional<std::string> resume;
  auto* train = app.add_subcommand("train-refiner", "train the refinement network");
  add_common(train, common);
  train->add_option("--coarse", coarse, "coarse manifest")->required();
  train->add_option("--real", real, "real tumor manifest")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");

  std::string checkpoint;
  auto* refine = app.add_subcommand("refine", "refine coarse pairs with a trained checkpoint");
  add_common(refine, common);
  refine->add_option("--checkpoint", checkpoint, "refiner checkpoint")->required();
  refine->add_option("--coarse", coarse, "coarse manifest")->required();

  std::vector<std::string> preds, baselines;
  std::string gt;
  auto* evaluate = app.add_subcommand("evaluate", "Dice report and significance test");
  add_common(evaluate, common);
  evaluate->add_option("--pred", preds, "prediction manifest, one per run; repeatable")->required();
  evaluate->add_option("--gt", gt, "ground-truth manifest")->required();
  evaluate->add_option("--baseline", baselines, "baseline manifest, one per run; repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "usage",
                        kValidation, e.what(), std::nullopt);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  std::optional<std::string> out_dir = common.out;
  try {
    const PipelineConfig config = load_config(common.config, common.overrides, common.seed, common.out);
    out_dir = config.out_dir;
    CommandResult result;
    const auto to_paths = [](const std::vector<std::string>& v) { return std::vector<fs::path>(v.begin(), v.end()); };
    if (name == "phantom") {
      result = cmd_phantom(config);
    } else if (name == "preprocess") {
      result = cmd_preprocess(config, input);
    } else if (name == "fit-intensity") {
      result = cmd_fit_intensity(config, healthy, tumor);
    } else if (name == "fabricate") {
      result = cmd_fabricate(config, healthy, tumor, count,
                             transform ? std::optional<fs::path>(*transform) : std::nullopt);
    } else if (name == "train-refiner") {
      result = cmd_train_refiner(config, coarse, real, resume ? std::optional<fs::path>(*resume) : std::nullopt);
    } else if (name == "refine") {
      result = cmd_refine(config, checkpoint, coarse);
    } else {
      result = cmd_evaluate(config, to_paths(preds), gt, to_paths(baselines));
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << Json{{"status", "ok"}, {"command", name}, {"seed", config.seed}, {"summary", result.summary},
                      {"warnings", result.warnings}}
                     .dump(2)
              << '\n';
    return kOk;
  } catch (const ValidationError& e) {
    return report_error(name, "validation", kValidation, e.what(), out_dir);
  } catch (const Json::exception& e) {
    return report_error(name, "validation", kValidation, e.what(), out_dir);
  } catch (const IoError& e) {
    return report_error(name, "io", kRuntime, e.what(), out_dir);
  } catch (const SamplingExhaustedError& e) {
    return report_error(name, "sampling_exhausted", kRuntime, e.what(), out_dir);
  } catch (const NonFiniteLossError& e) {
    return report_error(name, "non_finite_loss", kRuntime, e.what(), out_dir);
  } catch (const std::exception& e) {
    return report_error(name, "runtime", kRuntime, e.what(), out_dir);
  }
}
