#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "tumorfab/coarse_synth.hpp"
#include "tumorfab/config.hpp"
#include "tumorfab/error.hpp"
#include "tumorfab/eval_metrics.hpp"
#include "tumorfab/nifti_io.hpp"
#include "tumorfab/phantom.hpp"
#include "tumorfab/pipeline.hpp"
#include "tumorfab/preprocess.hpp"

namespace py = pybind11;
using namespace tumorfab;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Dims3 dims_of(const py::buffer_info& info, int first) {
  return {info.shape[first], info.shape[first + 1], info.shape[first + 2]};
}

// Accepts (H, W, D) or (C, H, W, D).
MriVolume to_volume(const FloatArray& a, float spacing) {
  const auto info = a.request();
  if (info.ndim != 3 && info.ndim != 4) throw ValidationError("volume array must be 3D or 4D");
  const int first = info.ndim == 4 ? 1 : 0;
  MriVolume v(info.ndim == 4 ? info.shape[0] : 1, dims_of(info, first), Geometry::isotropic(spacing));
  std::memcpy(v.data().data(), info.ptr, v.data().size() * sizeof(float));
  return v;
}

FloatArray from_volume(const MriVolume& v) {
  const auto& d = v.dims();
  FloatArray a({v.channels(), d.h, d.w, d.d});
  std::memcpy(a.mutable_data(), v.data().data(), v.data().size() * sizeof(float));
  return a;
}

SegMask to_mask(const LabelArray& a) {
  const auto info = a.request();
  if (info.ndim != 3) throw ValidationError("mask array must be 3D");
  SegMask m(dims_of(info, 0));
  std::memcpy(m.labels().data(), info.ptr, m.labels().size());
  validate_labels(m);
  return m;
}

LabelArray from_labels(const Dims3& d, const std::vector<uint8_t>& labels) {
  LabelArray a({d.h, d.w, d.d});
  std::memcpy(a.mutable_data(), labels.data(), labels.size());
  return a;
}

PipelineConfig config_from(const std::string& json_text) {
  PipelineConfig c = json_text.empty() ? PipelineConfig{} : config_from_json(Json::parse(json_text));
  c.resolve();
  c.validate();
  return c;
}

Region region_from(const std::string& name) {
  if (name == "ET") return Region::ET;
  if (name == "TC") return Region::TC;
  if (name == "WT") return Region::WT;
  throw ValidationError("unknown region '" + name + "' (expected ET, TC or WT)");
}

std::string result_json(const CommandResult& r) {
  return Json{{"summary", r.summary}, {"warnings", r.warnings}}.dump();
}

}  // namespace

PYBIND11_MODULE(_tumorfab, m) {
  m.doc() = "Native core of the tumorfab package";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("load_volume", [](const std::filesystem::path& p) {
    const auto v = load_volume(p);
    return py::make_tuple(from_volume(v), v.geometry().spacing);
  });
  m.def("save_volume", [](const FloatArray& a, const std::filesystem::path& p, float spacing) {
    save_volume(to_volume(a, spacing), p);
  }, py::arg("array"), py::arg("path"), py::arg("spacing") = 1.0f);
  m.def("load_mask", [](const std::filesystem::path& p) {
    const auto mask = load_mask(p);
    return from_labels(mask.dims(), mask.labels());
  });
  m.def("save_mask", [](const LabelArray& a, const std::filesystem::path& p) { save_mask(to_mask(a), p); });

  m.def("normalize_intensity", [](const FloatArray& a) { return from_volume(normalize_intensity(to_volume(a, 1.0f))); });
  m.def("compute_brain_mask", [](const FloatArray& a) {
    const auto b = compute_brain_mask(to_volume(a, 1.0f));
    return from_labels(b.dims(), b.values());
  });

  m.def("dice", [](const LabelArray& pred, const LabelArray& gt, const std::string& region) {
    return dice(to_mask(pred), to_mask(gt), region_from(region));
  });
  m.def("mean_dice", [](const LabelArray& pred, const LabelArray& gt) {
    const auto s = mean_dice(to_mask(pred), to_mask(gt));
    return py::dict(py::arg("ET") = s.et, py::arg("TC") = s.tc, py::arg("WT") = s.wt, py::arg("Mean") = s.mean);
  });
  m.def("t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto t = two_tailed_t_test(a, b);
    return py::dict(py::arg("t") = t.t_statistic, py::arg("p") = t.p_value, py::arg("df") = t.degrees_of_freedom,
                    py::arg("degenerate") = t.degenerate);
  });

  m.def("fabricate_coarse", [](const FloatArray& healthy, const LabelArray& mask, const std::string& transform_json,
                               double sigma) {
    const auto t = transform_from_json(Json::parse(transform_json));
    const auto pair = fabricate_coarse(to_volume(healthy, 1.0f), to_mask(mask), t, sigma);
    return from_volume(pair.image);
  }, py::arg("healthy"), py::arg("mask"), py::arg("transform_json"), py::arg("sigma") = kRoiBlurSigma);

  m.def("default_config", [] {
    PipelineConfig c;
    return to_json(c).dump();
  });
  m.def("phantom_case", [](const std::string& config_json, bool tumor) -> py::tuple {
    const auto c = config_from(config_json);
    if (!tumor) return py::make_tuple(from_volume(generate_phantom_brain(c.phantom.spec)), py::none());
    const auto pair = generate_phantom_tumor_case(c.phantom.spec);
    return py::make_tuple(from_volume(pair.image), from_labels(pair.mask.dims(), pair.mask.labels()));
  });

  // Pipeline commands take the full configuration as a JSON string and return
  // {"summary": ..., "warnings": [...]} as JSON.
  m.def("cmd_phantom", [](const std::string& cfg) { return result_json(cmd_phantom(config_from(cfg))); });
  m.def("cmd_preprocess", [](const std::string& cfg, const std::filesystem::path& input) {
    return result_json(cmd_preprocess(config_from(cfg), input));
  });
  m.def("cmd_fit_intensity", [](const std::string& cfg, const std::filesystem::path& healthy,
                                const std::filesystem::path& tumor) {
    return result_json(cmd_fit_intensity(config_from(cfg), healthy, tumor));
  });
  m.def("cmd_fabricate", [](const std::string& cfg, const std::filesystem::path& healthy,
                            const std::filesystem::path& tumor, int64_t count,
                            std::optional<std::filesystem::path> transform) {
    return result_json(cmd_fabricate(config_from(cfg), healthy, tumor, count, transform));
  }, py::arg("config"), py::arg("healthy"), py::arg("tumor"), py::arg("count"), py::arg("transform") = py::none());
  m.def("cmd_train_refiner", [](const std::string& cfg, const std::filesystem::path& coarse,
                                const std::filesystem::path& real, std::optional<std::filesystem::path> resume) {
    return result_json(cmd_train_refiner(config_from(cfg), coarse, real, resume));
  }, py::arg("config"), py::arg("coarse"), py::arg("real"), py::arg("resume") = py::none());
  m.def("cmd_refine", [](const std::string& cfg, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& coarse) {
    return result_json(cmd_refine(config_from(cfg), checkpoint, coarse));
  });
  m.def("cmd_evaluate", [](const std::string& cfg, const std::vector<std::filesystem::path>& preds,
                           const std::filesystem::path& gt, const std::vector<std::filesystem::path>& baselines) {
    return result_json(cmd_evaluate(config_from(cfg), preds, gt, baselines));
  }, py::arg("config"), py::arg("preds"), py::arg("gt"), py::arg("baselines") = std::vector<std::filesystem::path>{});
}
