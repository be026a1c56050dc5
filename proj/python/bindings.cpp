// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

// NumPy-facing wrappers. Arrays cross the boundary by copy as float64 NHWC.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "stdn/cli.hpp"
#include "stdn/errors.hpp"
#include "stdn/eval.hpp"
#include "stdn/losses.hpp"
#include "stdn/ops.hpp"
#include "stdn/synthdata.hpp"
#include "stdn/trace.hpp"
#include "stdn/train.hpp"
#include "stdn/warp3d.hpp"

namespace py = pybind11;
using namespace stdn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

// Adds a leading batch axis to [N,N,C] inputs.
Tensor to_batched(const Array& a) {
  Tensor t = to_tensor(a);
  if (t.rank() == 3) return reshape(t, {1, t.dim(0), t.dim(1), t.dim(2)});
  return t;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

LandmarkSet to_landmarks(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw DimensionError("landmarks must have shape (Q, 2)");
  LandmarkSet lm;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) lm.points.push_back({a.at(i, 0), a.at(i, 1)});
  return lm;
}

Array landmarks_array(const LandmarkSet& lm) {
  Array out({static_cast<py::ssize_t>(lm.size()), py::ssize_t{2}});
  for (size_t i = 0; i < lm.size(); ++i) {
    out.mutable_at(i, 0) = lm.points[i].x;
    out.mutable_at(i, 1) = lm.points[i].y;
  }
  return out;
}

Label to_label(const std::string& s) {
  auto l = parse_label(s);
  if (!l) throw ConfigError("unknown label '" + s + "'");
  return *l;
}

Medium to_medium(const std::string& s) {
  auto m = parse_medium(s);
  if (!m) throw ConfigError("unknown medium '" + s + "'");
  return *m;
}

TraceElements to_elements(const py::dict& d) {
  return {to_batched(d["s"].cast<Array>()), to_batched(d["b"].cast<Array>()), to_batched(d["C"].cast<Array>()),
          to_batched(d["T"].cast<Array>())};
}

py::dict elements_dict(const TraceElements& e) {
  py::dict d;
  d["s"] = to_array(e.s_color);
  d["b"] = to_array(e.b);
  d["C"] = to_array(e.C);
  d["T"] = to_array(e.T);
  return d;
}

py::dict sample_dict(const SyntheticSample& s) {
  py::dict d;
  d["id"] = s.id;
  d["seed"] = s.seed;
  d["image"] = to_array(s.image);
  d["base"] = to_array(s.base);
  d["landmarks"] = landmarks_array(s.landmarks);
  d["label"] = std::string(to_string(s.label));
  d["medium"] = s.medium ? py::object(py::str(std::string(to_string(*s.medium)))) : py::object(py::none());
  d["planted"] = s.planted ? py::object(elements_dict(*s.planted)) : py::object(py::none());
  return d;
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  d["eer"] = r.eer;
  d["threshold"] = r.threshold;
  d["apcer"] = r.apcer;
  d["bpcer"] = r.bpcer;
  d["acer"] = r.acer;
  d["tdr_at_fdr"] = r.tdr_at_fdr;
  return d;
}

std::vector<ScoreRecord> to_records(const std::vector<std::string>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw DimensionError("labels and scores differ in length");
  std::vector<ScoreRecord> out;
  for (size_t i = 0; i < labels.size(); ++i) out.push_back({std::to_string(i), to_label(labels[i]), {}, scores[i]});
  return out;
}

py::dict stats_dict(const StepStats& s) {
  py::dict d;
  d["iter"] = s.iter;
  d["L_G"] = s.l_g;
  d["L_ESR"] = s.l_esr;
  d["L_R"] = s.l_r;
  d["L_D"] = s.l_d;
  d["L_P"] = s.l_p;
  d["total"] = s.total;
  d["gen_lr"] = s.gen_lr;
  d["disc_lr"] = s.disc_lr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spoof trace disentanglement core";

  static py::exception<DimensionError> dimension_error(m, "DimensionError", PyExc_ValueError);
  static py::exception<DomainError> domain_error(m, "DomainError", PyExc_ValueError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  static py::exception<DegenerateGeometryError> geometry_error(m, "DegenerateGeometryError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DimensionError& e) {
      dimension_error(e.what());
    } catch (const DomainError& e) {
      domain_error(e.what());
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const NumericError& e) {
      numeric_error(e.what());
    } catch (const DegenerateGeometryError& e) {
      geometry_error(e.what());
    }
  });

  m.def(
      "compose", [](const py::dict& elems, const Array& img) { return to_array(compose(to_elements(elems), to_batched(img))); },
      py::arg("elements"), py::arg("image"), "Spoof trace from its four elements and the input image.");
  m.def(
      "reconstruct_live",
      [](const Array& img, const py::dict& elems) { return to_array(reconstruct_live(to_batched(img), to_elements(elems))); },
      py::arg("image"), py::arg("elements"));
  m.def(
      "synthesize_spoof",
      [](const Array& live, const Array& live_lm, const Array& trace, const Array& src_lm) {
        return to_array(synthesize_spoof(to_batched(live), to_landmarks(live_lm), to_batched(trace), to_landmarks(src_lm)));
      },
      py::arg("live"), py::arg("live_landmarks"), py::arg("trace"), py::arg("trace_landmarks"));
  m.def(
      "warp_trace",
      [](const Array& trace, const Array& src, const Array& dst) {
        return to_array(warp_trace(to_batched(trace), to_landmarks(src), to_landmarks(dst)));
      },
      py::arg("trace"), py::arg("src"), py::arg("dst"));
  m.def(
      "sparse_to_dense",
      [](const Array& anchors, const Array& offsets, int64_t size) {
        const LandmarkSet off = to_landmarks(offsets);
        const DenseOffset d = sparse_to_dense(to_landmarks(anchors), off.points, size);
        Array out({static_cast<py::ssize_t>(size), static_cast<py::ssize_t>(size), py::ssize_t{2}});
        std::copy(d.field.begin(), d.field.end(), out.mutable_data());
        return out;
      },
      py::arg("anchors"), py::arg("offsets"), py::arg("size"), "Dense (N, N, 2) offset field.");

  m.def(
      "score", [](const Array& map, const Array& trace, double alpha0) { return score(to_tensor(map), to_tensor(trace), alpha0); },
      py::arg("spoof_map"), py::arg("trace"), py::arg("alpha0"));
  m.def(
      "roc_metrics",
      [](const std::vector<std::string>& labels, const std::vector<double>& scores, std::optional<double> threshold) {
        const auto recs = to_records(labels, scores);
        return metrics_dict(roc_metrics(recs, threshold));
      },
      py::arg("labels"), py::arg("scores"), py::arg("threshold") = py::none(),
      "Labels are 'live' or 'spoof'; a score >= threshold is called spoof.");
  m.def(
      "calibrate_alpha0",
      [](const std::vector<std::string>& labels, const std::vector<double>& map_terms,
         const std::vector<double>& trace_terms) {
        if (labels.size() != map_terms.size() || labels.size() != trace_terms.size())
          throw DimensionError("calibrate_alpha0: length mismatch");
        std::vector<LabeledTerms> recs;
        for (size_t i = 0; i < labels.size(); ++i) recs.push_back({to_label(labels[i]), {map_terms[i], trace_terms[i]}});
        return calibrate_alpha0(recs);
      },
      py::arg("labels"), py::arg("map_terms"), py::arg("trace_terms"));
  m.def("alpha0_grid", &alpha0_grid);

  m.def(
      "esr_loss",
      [](const Array& maps, const std::vector<std::string>& labels) {
        std::vector<Label> ls;
        for (const auto& l : labels) ls.push_back(to_label(l));
        return esr_loss(to_tensor(maps), ls).item();
      },
      py::arg("maps"), py::arg("labels"));
  m.def(
      "pixel_loss", [](const Array& a, const Array& b) { return pixel_loss(to_tensor(a), to_tensor(b)).item(); },
      py::arg("recovered"), py::arg("target"));
  m.def(
      "total_generator_loss",
      [](double l_g, double l_esr, double l_r) { return total_generator_loss(l_g, l_esr, l_r, LossWeights{}); },
      py::arg("l_g"), py::arg("l_esr"), py::arg("l_r"), "Weighted total with the default loss weights.");
  m.def(
      "total_supervision_loss", [](double l_esr, double l_p) { return total_supervision_loss(l_esr, l_p, LossWeights{}); },
      py::arg("l_esr"), py::arg("l_p"));

  m.def(
      "gen_live", [](uint64_t seed, int64_t size) { return sample_dict(gen_live(seed, size)); }, py::arg("seed"),
      py::arg("size") = 64);
  m.def(
      "gen_spoof",
      [](uint64_t seed, const std::string& medium, int64_t size) { return sample_dict(gen_spoof(seed, to_medium(medium), size)); },
      py::arg("seed"), py::arg("medium"), py::arg("size") = 64);
  m.def(
      "gen_dataset",
      [](int64_t n_live, int64_t n_spoof, uint64_t seed, int64_t size, double test_fraction) {
        DatasetConfig cfg;
        cfg.n_live = n_live;
        cfg.n_spoof = n_spoof;
        cfg.seed = seed;
        cfg.image_size = size;
        cfg.test_fraction = test_fraction;
        const Dataset d = gen_dataset(cfg);
        py::dict out;
        py::list train, test;
        for (const auto& s : d.train) train.append(sample_dict(s));
        for (const auto& s : d.test) test.append(sample_dict(s));
        out["train"] = train;
        out["test"] = test;
        return out;
      },
      py::arg("n_live") = 200, py::arg("n_spoof") = 200, py::arg("seed") = 0, py::arg("size") = 64,
      py::arg("test_fraction") = 0.2);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_text) { return Trainer(parse_train_config(config_text)); }),
           py::arg("config") = "", "config is `key = value` text; absent keys keep their defaults.")
      .def_property_readonly("iteration", &Trainer::iteration)
      .def_property_readonly("config", [](const Trainer& t) { return format_train_config(t.config()); })
      .def(
          "train",
          [](Trainer& t, const py::list& samples, int64_t until) {
            std::vector<SyntheticSample> v;
            for (const auto& item : samples) {
              const auto d = item.cast<py::dict>();
              SyntheticSample s;
              s.id = d["id"].cast<std::string>();
              s.image = to_batched(d["image"].cast<Array>());
              s.landmarks = to_landmarks(d["landmarks"].cast<Array>());
              s.label = to_label(d["label"].cast<std::string>());
              s.base = s.image;
              v.push_back(std::move(s));
            }
            const TrainingSet data(std::move(v), t.config().image_size);
            py::list log;
            t.run(data, until, [&](const StepStats& s) { log.append(stats_dict(s)); });
            return log;
          },
          py::arg("samples"), py::arg("until"), "Steps until iteration == until; returns one dict per step.")
      .def(
          "infer",
          [](Trainer& t, const Array& images) {
            const Inference r = infer(t.generator(), to_batched(images));
            py::dict d = elements_dict(r.elems);
            d["spoof_map"] = to_array(r.spoof_map);
            d["trace"] = to_array(r.trace);
            return d;
          },
          py::arg("images"))
      .def("save", [](const Trainer& t, const std::string& path) { t.save(std::filesystem::path(path)); })
      .def_static(
          "load",
          [](const std::string& path, const std::string& config_text) {
            return Trainer::load(std::filesystem::path(path), parse_train_config(config_text));
          },
          py::arg("path"), py::arg("config") = "");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one `stdn` subcommand; returns (exit_code, stdout, stderr).");
}
