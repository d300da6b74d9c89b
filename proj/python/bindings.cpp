#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <unordered_map>

#include "segaug/augment.hpp"
#include "segaug/distribution.hpp"
#include "segaug/errors.hpp"
#include "segaug/eval.hpp"
#include "segaug/experiment.hpp"
#include "segaug/generator.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"
#include "segaug/mixer.hpp"
#include "segaug/pnm.hpp"
#include "segaug/rng.hpp"
#include "segaug/segmenter.hpp"
#include "segaug/synthworld.hpp"

namespace py = pybind11;
using namespace segaug;

namespace {

py::object json_to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json py_to_json(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) {
    return parse_json(obj.cast<std::string>(), "json argument");
  }
  std::string dumped =
      py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return parse_json(dumped, "json argument");
}

LabelMap labelmap_from_numpy(py::array_t<std::uint8_t, py::array::c_style |
                                                           py::array::forcecast>
                                 array) {
  if (array.ndim() != 2) {
    throw ValidationError("label map array must be 2-D (height, width)");
  }
  LabelMap m;
  m.height = int(array.shape(0));
  m.width = int(array.shape(1));
  m.data.resize(std::size_t(m.width) * m.height);
  std::memcpy(m.data.data(), array.data(), m.data.size());
  return m;
}

py::array_t<std::uint8_t> labelmap_to_numpy(const LabelMap& m) {
  py::array_t<std::uint8_t> array({m.height, m.width});
  std::memcpy(array.mutable_data(), m.data.data(), m.data.size());
  return array;
}

RenderedImage image_from_numpy(
    py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> array) {
  if (array.ndim() != 3 || array.shape(2) != 3) {
    throw ValidationError("image array must be 3-D (height, width, 3)");
  }
  RenderedImage img;
  img.height = int(array.shape(0));
  img.width = int(array.shape(1));
  img.data.resize(3 * std::size_t(img.width) * img.height);
  std::memcpy(img.data.data(), array.data(), img.data.size());
  return img;
}

py::array_t<std::uint8_t> image_to_numpy(const RenderedImage& img) {
  py::array_t<std::uint8_t> array({img.height, img.width, 3});
  std::memcpy(array.mutable_data(), img.data.data(), img.data.size());
  return array;
}

std::vector<TrainSample> samples_from_numpy(
    py::array_t<double, py::array::c_style | py::array::forcecast> features,
    py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast> classes) {
  if (features.ndim() != 2 || features.shape(1) != kFeatureDim) {
    throw ValidationError("features must be (n, 6)");
  }
  if (classes.ndim() != 1 || classes.shape(0) != features.shape(0)) {
    throw ValidationError("classes must be (n,)");
  }
  std::vector<TrainSample> samples(std::size_t(features.shape(0)));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int f = 0; f < kFeatureDim; ++f) {
      samples[i].x[f] = features.at(py::ssize_t(i), f);
    }
    samples[i].class_index = classes.at(py::ssize_t(i));
  }
  return samples;
}

}  // namespace

PYBIND11_MODULE(_segaug, m) {
  m.doc() = "Label-map augmentation and desk-scale segmentation experiments";

  py::register_exception<GeneratorError>(m, "GeneratorException");
  py::register_exception<ValidationError>(m, "ValidationException");

  py::class_<ClassTable>(m, "ClassTable")
      .def(py::init([](const std::vector<std::pair<int, std::string>>& entries,
                       int ignore_id) {
             std::vector<ClassEntry> es;
             for (const auto& [id, name] : entries) {
               es.push_back({std::uint8_t(id), name});
             }
             return ClassTable(std::move(es), std::uint8_t(ignore_id));
           }),
           py::arg("entries"), py::arg("ignore_id") = 255)
      .def_static("cityscapes19", &ClassTable::cityscapes19)
      .def_static("from_json",
                  [](const py::object& j) { return ClassTable::from_json(py_to_json(j)); })
      .def("to_json", [](const ClassTable& t) { return json_to_py(t.to_json()); })
      .def_property_readonly("ignore_id", &ClassTable::ignore_id)
      .def("__len__", &ClassTable::size)
      .def("contains", &ClassTable::contains)
      .def("name_of", &ClassTable::name_of)
      .def("id_of", [](const ClassTable& t, const std::string& name) {
        return t.id_of(name);
      })
      .def("entries", [](const ClassTable& t) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& e : t.entries()) out.emplace_back(e.id, e.name);
        return out;
      });

  py::class_<LabelMap>(m, "LabelMap")
      .def(py::init(&labelmap_from_numpy), py::arg("array"))
      .def_static("filled", &LabelMap::filled)
      .def_readonly("width", &LabelMap::width)
      .def_readonly("height", &LabelMap::height)
      .def("to_numpy", &labelmap_to_numpy)
      .def("__eq__", [](const LabelMap& a, const LabelMap& b) { return a == b; });

  py::class_<Mask>(m, "Mask")
      .def_readonly("class_id", &Mask::class_id)
      .def_readonly("width", &Mask::width)
      .def_readonly("height", &Mask::height)
      .def_readonly("source_id", &Mask::source_id)
      .def_property_readonly("pixel_count", &Mask::pixel_count)
      .def("pixels", [](const Mask& mask) {
        py::array_t<std::uint16_t> array({py::ssize_t(mask.pixels.size()),
                                          py::ssize_t(2)});
        auto view = array.mutable_unchecked<2>();
        for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
          view(py::ssize_t(i), 0) = mask.pixels[i].x;
          view(py::ssize_t(i), 1) = mask.pixels[i].y;
        }
        return array;
      });

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform_index", &Rng::uniform_index)
      .def("uniform_real", &Rng::uniform_real)
      .def("normal", &Rng::normal, py::arg("mean") = 0.0, py::arg("sigma") = 1.0);

  m.def("derive_seed",
        py::overload_cast<std::uint64_t, std::string_view>(&derive_seed));

  // Codecs
  m.def("load_pgm", [](py::bytes data) {
    std::string s = data;
    return load_pgm(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });
  m.def("save_pgm", [](const LabelMap& map) {
    auto bytes = save_pgm(map);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("load_ppm", [](py::bytes data) {
    std::string s = data;
    return load_ppm(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });
  m.def("save_ppm", [](const RenderedImage& img) {
    auto bytes = save_ppm(img);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });

  // Label-map algebra
  m.def("validate_labelmap", &validate_labelmap);
  m.def("separate", &separate, py::arg("map"), py::arg("table"),
        py::arg("source_id") = "");
  m.def("compose", [](const std::vector<Mask>& masks, int width, int height,
                      int fill) {
    return compose(masks, width, height, std::uint8_t(fill));
  });
  m.def("overlay", &overlay);

  // Distribution statistics
  py::class_<FrequencyReport>(m, "FrequencyReport")
      .def_property_readonly("dataset_size",
                             [](const FrequencyReport& r) { return r.dataset_size; })
      .def("to_dict", [](const FrequencyReport& r) { return json_to_py(r.to_json()); })
      .def("appearance_frequency", [](const FrequencyReport& r, int id) {
        return r.for_class(std::uint8_t(id)).appearance_frequency;
      })
      .def("pixel_share", [](const FrequencyReport& r, int id) {
        return r.for_class(std::uint8_t(id)).pixel_share;
      });
  m.def("appearance_frequency",
        [](const std::vector<LabelMap>& maps, const ClassTable& table) {
          return appearance_frequency(maps, table);
        });
  m.def("rank_correlation",
        [](const FrequencyReport& freq, const std::map<int, double>& accuracy) {
          std::map<std::uint8_t, double> acc;
          for (const auto& [id, v] : accuracy) acc[std::uint8_t(id)] = v;
          return json_to_py(rank_correlation(freq, acc).to_json());
        });
  m.def("select_target_classes",
        [](const FrequencyReport& freq, std::optional<std::size_t> k,
           std::optional<double> threshold) {
          if (k.has_value() == threshold.has_value()) {
            throw ValidationError("pass exactly one of k or threshold");
          }
          std::vector<std::uint8_t> ids =
              k ? select_target_classes(freq, CountK{*k})
                : select_target_classes(freq, Threshold{*threshold});
          return std::vector<int>(ids.begin(), ids.end());
        },
        py::arg("freq"), py::arg("k") = std::nullopt,
        py::arg("threshold") = std::nullopt);

  // Mask library and synthesis
  py::class_<MaskLibrary>(m, "MaskLibrary")
      .def_property_readonly("min_pixels",
                             [](const MaskLibrary& l) { return l.min_pixels; })
      .def("class_ids", [](const MaskLibrary& l) {
        auto ids = l.class_ids();
        return std::vector<int>(ids.begin(), ids.end());
      })
      .def("total_masks", &MaskLibrary::total_masks)
      .def("masks_of", [](const MaskLibrary& l, int id) {
        auto it = l.by_class.find(std::uint8_t(id));
        return it == l.by_class.end() ? std::vector<Mask>{} : it->second;
      })
      .def("to_json", [](const MaskLibrary& l) { return json_to_py(l.to_json()); });

  m.def("build_mask_library",
        [](const std::vector<std::pair<std::string, LabelMap>>& maps,
           const ClassTable& table, std::size_t min_pixels) {
          std::vector<SourceMap> srcs;
          for (const auto& [id, map] : maps) srcs.push_back({id, map});
          return build_mask_library(srcs, table, min_pixels);
        });
  m.def("sample_mask", [](const MaskLibrary& lib, int class_id, Rng& rng) {
    return sample_mask(lib, std::uint8_t(class_id), rng);
  });

  py::class_<BasicLayout>(m, "BasicLayout")
      .def(py::init([](const std::vector<std::pair<int, double>>& bands) {
        BasicLayout layout;
        for (const auto& [id, fraction] : bands) {
          layout.bands.push_back({std::uint8_t(id), fraction});
        }
        layout.validate();
        return layout;
      }))
      .def_static("defaults_for", &BasicLayout::defaults_for);
  m.def("make_basic_map", &make_basic_map);
  m.def("default_z_order", [](const ClassTable& table) {
    auto ids = default_z_order(table);
    return std::vector<int>(ids.begin(), ids.end());
  });

  py::class_<SyntheticRecord>(m, "SyntheticRecord")
      .def_readonly("id", &SyntheticRecord::id)
      .def_readonly("label_map", &SyntheticRecord::label_map)
      .def_readonly("strategy", &SyntheticRecord::strategy)
      .def_readonly("base_id", &SyntheticRecord::base_id)
      .def_readonly("item_seed", &SyntheticRecord::item_seed)
      .def("applied", [](const SyntheticRecord& r) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& a : r.applied) out.emplace_back(a.class_id, a.source_id);
        return out;
      })
      .def("provenance", [](const SyntheticRecord& r) {
        return json_to_py(r.provenance_json());
      });

  m.def("augment_single_label",
        [](const std::vector<std::pair<std::string, LabelMap>>& dataset,
           const MaskLibrary& lib, int class_id, std::size_t count,
           std::uint64_t seed) {
          std::vector<SourceMap> srcs;
          for (const auto& [id, map] : dataset) srcs.push_back({id, map});
          return augment_single_label(srcs, lib, std::uint8_t(class_id), count, seed);
        });
  m.def("augment_multi_label",
        [](const std::vector<std::pair<std::string, LabelMap>>& dataset,
           const MaskLibrary& lib, const std::vector<int>& classes,
           std::size_t count, std::uint64_t seed) {
          std::vector<SourceMap> srcs;
          for (const auto& [id, map] : dataset) srcs.push_back({id, map});
          std::vector<std::uint8_t> cs(classes.begin(), classes.end());
          return augment_multi_label(srcs, lib, cs, count, seed);
        });
  m.def("reconstruct_many",
        [](const MaskLibrary& lib, const BasicLayout& layout, std::size_t n_labels,
           const std::vector<int>& z_order, int width, int height,
           std::size_t count, std::uint64_t seed) {
          std::vector<std::uint8_t> z(z_order.begin(), z_order.end());
          return reconstruct_many(lib, layout, n_labels, z, width, height, count,
                                  seed);
        });

  // Rendering
  py::class_<Palette>(m, "Palette")
      .def_static("defaults_for", &Palette::defaults_for)
      .def_static("from_json",
                  [](const py::object& j) { return Palette::from_json(py_to_json(j)); })
      .def("to_json", [](const Palette& p) { return json_to_py(p.to_json()); })
      .def("color_of", [](const Palette& p, int id) {
        Rgb c = p.color_of(std::uint8_t(id));
        return py::make_tuple(c.r, c.g, c.b);
      });

  py::class_<RenderedImage>(m, "RenderedImage")
      .def(py::init(&image_from_numpy), py::arg("array"))
      .def_readonly("width", &RenderedImage::width)
      .def_readonly("height", &RenderedImage::height)
      .def("to_numpy", &image_to_numpy)
      .def("__eq__",
           [](const RenderedImage& a, const RenderedImage& b) { return a == b; });

  m.def("render_palette", &render_palette, py::arg("map"), py::arg("palette"),
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);
  m.def("invert_palette", &invert_palette);
  m.def("render_external",
        [](const LabelMap& map, const std::string& command, double timeout_s) {
          return render_external(map, {command, timeout_s});
        },
        py::arg("map"), py::arg("command"), py::arg("timeout_s") = 300.0,
        py::call_guard<py::gil_scoped_release>());

  // Mixing and schedules
  py::class_<ManifestEntry>(m, "ManifestEntry")
      .def(py::init([](const std::string& image, const std::string& label,
                       const std::string& origin, const std::string& strategy) {
             return ManifestEntry{image, label, origin_from_string(origin), strategy};
           }),
           py::arg("image"), py::arg("label"), py::arg("origin") = "ORIGINAL",
           py::arg("strategy") = "")
      .def_readonly("image", &ManifestEntry::image_path)
      .def_readonly("label", &ManifestEntry::label_path)
      .def_property_readonly("origin",
                             [](const ManifestEntry& e) { return to_string(e.origin); })
      .def_readonly("strategy", &ManifestEntry::strategy_tag);

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def_readonly("entries", &DatasetManifest::entries)
      .def_readonly("requested_ratio", &DatasetManifest::requested_ratio)
      .def_readonly("achieved_ratio", &DatasetManifest::achieved_ratio)
      .def_readonly("with_replacement", &DatasetManifest::with_replacement)
      .def("supplementary_count", &DatasetManifest::supplementary_count)
      .def("to_jsonl", &DatasetManifest::to_jsonl)
      .def_static("from_jsonl", &DatasetManifest::from_jsonl);

  m.def("mix_manifest",
        [](const std::vector<ManifestEntry>& original,
           const std::vector<ManifestEntry>& supplementary, double ratio,
           std::uint64_t seed) {
          return mix_manifest(original, supplementary, ratio, seed);
        });

  py::class_<TrainingSchedule>(m, "TrainingSchedule")
      .def_property_readonly("mode",
                             [](const TrainingSchedule& s) { return to_string(s.mode); })
      .def_readonly("phases", &TrainingSchedule::phases)
      .def_readonly("degenerate", &TrainingSchedule::degenerate);

  m.def("build_schedule",
        [](const DatasetManifest& manifest, const std::string& mode,
           std::uint64_t seed) {
          return build_schedule(manifest, schedule_mode_from_string(mode), seed);
        });

  // Evaluation
  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init<const ClassTable&>())
      .def("accumulate", &ConfusionMatrix::accumulate)
      .def("merge", &ConfusionMatrix::merge)
      .def("at", [](const ConfusionMatrix& m, std::size_t g, std::size_t p) {
        return m.at(g, p);
      })
      .def_property_readonly("ignored_pixels", &ConfusionMatrix::ignored_pixels);

  py::class_<IoUReport>(m, "IoUReport")
      .def_property_readonly("mean_iou",
                             [](const IoUReport& r) { return r.mean_iou; })
      .def("iou_of", [](const IoUReport& r, int id) {
        return r.iou_of(std::uint8_t(id));
      })
      .def("to_dict", [](const IoUReport& r) { return json_to_py(r.to_json()); })
      .def_static("from_json", [](const py::object& j) {
        return IoUReport::from_json(py_to_json(j));
      });
  m.def("iou_report", &iou_report);
  m.def("comparison_text",
        [](const IoUReport& baseline, const std::vector<IoUReport>& candidates,
           const std::vector<std::string>& labels) {
          return render_comparison_text(compare_reports(baseline, candidates, labels));
        });

  // Segmenter
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](double learning_rate, int epochs, std::size_t batch,
                       double l2, std::uint64_t seed, double pixel_subsample) {
             TrainConfig c{learning_rate, epochs, batch, l2, seed, pixel_subsample};
             c.validate();
             return c;
           }),
           py::arg("learning_rate") = 0.5, py::arg("epochs") = 60,
           py::arg("batch") = 256, py::arg("l2") = 1e-5, py::arg("seed") = 0,
           py::arg("pixel_subsample") = 0.25)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<SoftmaxModel>(m, "SoftmaxModel")
      .def_static("zeros", &SoftmaxModel::zeros)
      .def("to_json", [](const SoftmaxModel& m) { return json_to_py(m.to_json()); })
      .def_property_readonly("num_classes", &SoftmaxModel::num_classes)
      .def_property_readonly("weights", [](const SoftmaxModel& model) {
        py::array_t<double> array({py::ssize_t(model.num_classes()),
                                   py::ssize_t(kFeatureDim)});
        std::memcpy(array.mutable_data(), model.weights.data(),
                    model.weights.size() * sizeof(double));
        return array;
      });

  m.def("loss_and_grad",
        [](const SoftmaxModel& model, py::array_t<double> features,
           py::array_t<std::uint32_t> classes, double l2) {
          auto samples = samples_from_numpy(features, classes);
          auto [loss, grad] = loss_and_grad(model, samples, l2);
          py::array_t<double> g({py::ssize_t(model.num_classes()),
                                 py::ssize_t(kFeatureDim)});
          std::memcpy(g.mutable_data(), grad.data(), grad.size() * sizeof(double));
          return py::make_tuple(loss, g);
        });
  m.def("finite_diff_check",
        [](const SoftmaxModel& model, py::array_t<double> features,
           py::array_t<std::uint32_t> classes, double l2, double epsilon) {
          auto samples = samples_from_numpy(features, classes);
          return finite_diff_check(model, samples, l2, epsilon);
        });

  m.def("train_pairs",
        [](const TrainingSchedule& schedule,
           const std::map<std::string, std::pair<RenderedImage, LabelMap>>& store,
           const ClassTable& table, const TrainConfig& config) {
          std::unordered_map<std::string, SamplePair> pairs;
          for (const auto& [key, value] : store) {
            pairs.emplace(key, SamplePair{value.first, value.second});
          }
          PairLoader loader = [&pairs](const ManifestEntry& e) -> const SamplePair& {
            auto it = pairs.find(e.label_path);
            if (it == pairs.end()) {
              throw ValidationError("train_pairs: no pair for " + e.label_path);
            }
            return it->second;
          };
          TrainResult result;
          {
            py::gil_scoped_release release;
            result = train(schedule, loader, table, config);
          }
          std::vector<std::tuple<int, int, double>> trace;
          for (const auto& t : result.trace) {
            trace.emplace_back(t.phase, t.epoch, t.loss);
          }
          return py::make_tuple(result.model, trace);
        });
  m.def("predict", &predict);
  m.def("pixel_features", [](const RenderedImage& image, int x, int y) {
    auto f = pixel_features(image, x, y);
    return std::vector<double>(f.begin(), f.end());
  });

  // Synthetic world + experiment
  py::class_<WorldConfig>(m, "WorldConfig")
      .def_static("default_world", &WorldConfig::default_world)
      .def_static("from_json", [](const py::object& j) {
        return WorldConfig::from_json(py_to_json(j));
      })
      .def("to_json", [](const WorldConfig& c) { return json_to_py(c.to_json()); })
      .def_readwrite("seed", &WorldConfig::seed)
      .def_readwrite("count", &WorldConfig::count)
      .def_readwrite("noise_sigma", &WorldConfig::noise_sigma)
      .def_property_readonly("table",
                             [](const WorldConfig& c) { return c.table; })
      .def_property_readonly("palette",
                             [](const WorldConfig& c) { return c.palette; });

  py::class_<WorldSample>(m, "WorldSample")
      .def_readonly("id", &WorldSample::id)
      .def_readonly("labels", &WorldSample::labels)
      .def_readonly("image", &WorldSample::image);

  m.def("generate_dataset", &generate_dataset,
        py::call_guard<py::gil_scoped_release>());

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("from_json", [](const py::object& j) {
        return ExperimentConfig::from_json(py_to_json(j));
      })
      .def("to_json", [](const ExperimentConfig& c) { return json_to_py(c.to_json()); })
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("ratios", &ExperimentConfig::ratios)
      .def_readwrite("strategies", &ExperimentConfig::strategies)
      .def_readwrite("test_count", &ExperimentConfig::test_count)
      .def_readwrite("jobs", &ExperimentConfig::jobs);

  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def("to_dict", [](const ExperimentReport& r) { return json_to_py(r.to_json()); })
      .def("text", [](const ExperimentReport& r) { return report_text(r); })
      .def("csv", [](const ExperimentReport& r) { return report_csv(r); })
      .def("json", [](const ExperimentReport& r) { return report_json(r); });

  m.def("run_experiment", &run_experiment,
        py::call_guard<py::gil_scoped_release>());
}
