// Copyright 2026 The VAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Python module: numpy in, numpy out.  Tensors are float32 row-major on
// both sides, so the bridge is a copy with no axis shuffling.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vap/config.hpp"
#include "vap/errors.hpp"
#include "vap/evaluation.hpp"
#include "vap/flow.hpp"
#include "vap/gradcheck.hpp"
#include "vap/layers.hpp"
#include "vap/model.hpp"
#include "vap/parsing.hpp"
#include "vap/rng.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

namespace py = pybind11;
using namespace vap;

namespace {

using NpArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const NpArray& a) {
  if (a.ndim() == 0) throw ShapeError("expected an array, got a scalar");
  std::vector<int64_t> dims(static_cast<size_t>(a.ndim()));
  for (py::ssize_t i = 0; i < a.ndim(); ++i)
    dims[static_cast<size_t>(i)] = a.shape(i);
  Tensor t = Tensor::zeros(Shape(dims));
  std::memcpy(t.data(), a.data(), sizeof(float) * static_cast<size_t>(t.size()));
  return t;
}

py::array_t<float> to_numpy(const Tensor& t) {
  py::array_t<float> a(t.shape().dims);
  std::memcpy(a.mutable_data(), t.data(),
              sizeof(float) * static_cast<size_t>(t.size()));
  return a;
}

Cuboid to_cuboid(const std::array<double, 6>& v) {
  return Cuboid{v[0], v[1], v[2], v[3], v[4], v[5]};
}

Targets to_targets(const std::vector<int>& categories, const NpArray& h1,
                   const NpArray& h2, const NpArray& loc) {
  Targets t;
  t.category = categories;
  t.h1 = to_tensor(h1);
  t.h2 = to_tensor(h2);
  t.loc = to_tensor(loc);
  return t;
}

py::dict heads_to_dict(const HeadOutputs& h) {
  py::dict d;
  d["loc"] = to_numpy(h.loc);
  d["class_probs"] = to_numpy(h.class_probs);
  d["h1_probs"] = to_numpy(h.h1_probs);
  d["h2_probs"] = to_numpy(h.h2_probs);
  return d;
}

py::dict loss_to_dict(const LossBreakdown& l) {
  py::dict d;
  d["category"] = l.category;
  d["h1"] = l.h1;
  d["h2"] = l.h2;
  d["loc"] = l.loc;
  d["total"] = l.total;
  return d;
}

py::dict detection_to_dict(const Detection& det) {
  py::dict d;
  d["video_id"] = det.video_id;
  d["x"] = det.x;
  d["y"] = det.y;
  d["t"] = det.t;
  d["w"] = det.w;
  d["h"] = det.h;
  d["l"] = det.l;
  d["category_id"] = det.category_id;
  d["score"] = det.score;
  d["h1_probs"] = py::cast(std::vector<double>(det.h1_probs.begin(),
                                               det.h1_probs.end()));
  d["h2_probs"] = py::cast(std::vector<double>(det.h2_probs.begin(),
                                               det.h2_probs.end()));
  return d;
}

ModelConfig profile_config(const std::string& profile, int64_t categories) {
  if (profile == "toy") return ModelConfig::toy(categories);
  if (profile == "paper") return ModelConfig::paper(categories);
  if (profile == "tiny") return ModelConfig::tiny(categories);
  throw ArgumentError("unknown profile '" + profile +
                      "'; expected toy, paper or tiny");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spatio-temporal action parsing core";
  m.attr("NUM_H1") = static_cast<int>(kNumH1);
  m.attr("NUM_H2") = static_cast<int>(kNumH2);

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const NumericError& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const GeometryError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ParseError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DataError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  // ------------------------------------------------------------------ layers
  m.def(
      "conv3d",
      [](const NpArray& input, const NpArray& weights, const NpArray& bias,
         std::array<int, 3> stride, std::array<int, 3> pad) {
        return to_numpy(conv3d_forward(to_tensor(input), to_tensor(weights),
                                       to_tensor(bias), stride, pad));
      },
      py::arg("input"), py::arg("weights"), py::arg("bias"),
      py::arg("stride") = std::array<int, 3>{1, 1, 1},
      py::arg("pad") = std::array<int, 3>{0, 0, 0},
      "3-D convolution of (N, C, T, H, W) input");
  m.def(
      "maxpool3d",
      [](const NpArray& input, std::array<int, 3> kernel,
         std::array<int, 3> stride) {
        return to_numpy(
            maxpool3d_forward(to_tensor(input), kernel, stride).output);
      },
      py::arg("input"), py::arg("kernel") = std::array<int, 3>{2, 2, 2},
      py::arg("stride") = std::array<int, 3>{2, 2, 2});
  m.def("relu",
        [](const NpArray& x) { return to_numpy(relu_forward(to_tensor(x))); });
  m.def("sigmoid",
        [](const NpArray& x) { return to_numpy(sigmoid(to_tensor(x))); });
  m.def("softmax",
        [](const NpArray& x) { return to_numpy(softmax(to_tensor(x))); });
  m.def(
      "fc",
      [](const NpArray& input, const NpArray& weights, const NpArray& bias) {
        return to_numpy(fc_forward(to_tensor(input), to_tensor(weights),
                                   to_tensor(bias)));
      },
      py::arg("input"), py::arg("weights"), py::arg("bias"));
  m.def(
      "softmax_cross_entropy",
      [](const NpArray& logits, const std::vector<int>& labels) {
        const SoftmaxLossResult r =
            softmax_cross_entropy(to_tensor(logits), labels);
        return py::make_tuple(r.value, to_numpy(r.probs));
      },
      py::arg("logits"), py::arg("labels"),
      "Mean cross entropy; returns (value, probabilities)");
  m.def(
      "multilabel_cross_entropy",
      [](const NpArray& probs, const NpArray& targets) {
        return multilabel_cross_entropy(to_tensor(probs), to_tensor(targets))
            .value;
      },
      py::arg("probs"), py::arg("targets"));
  m.def(
      "euclidean_loss",
      [](const NpArray& pred, const NpArray& target) {
        return euclidean_loss(to_tensor(pred), to_tensor(target)).value;
      },
      py::arg("pred"), py::arg("target"));

  // -------------------------------------------------------------------- flow
  m.def(
      "grayscale",
      [](const NpArray& rgb) { return to_numpy(grayscale(to_tensor(rgb))); },
      py::arg("rgb"), "(T, H, W, 3) -> (T, H, W) luminance");
  m.def(
      "compose_am",
      [](const NpArray& gray, double alpha, int iterations) {
        return to_numpy(compose_am(to_tensor(gray), alpha, iterations));
      },
      py::arg("gray"), py::arg("alpha") = 0.06, py::arg("iterations") = 40,
      "(T, H, W) -> (3, T, H, W) intensity plus optical-flow velocities");
  m.def(
      "warp_am",
      [](const NpArray& am, int64_t t, int64_t h, int64_t w) {
        return to_numpy(warp_am(to_tensor(am), t, h, w));
      },
      py::arg("am"), py::arg("t"), py::arg("h"), py::arg("w"));

  // ------------------------------------------------------------------- synth
  m.def("h1_bit_name", &h1_bit_name, py::arg("index"));
  m.def("h2_bit_name", &h2_bit_name, py::arg("index"));
  m.def(
      "make_clip",
      [](int category_id, int64_t canvas, int64_t length, uint64_t seed) {
        Rng rng(mix_seed(seed, 0x9B1Du));
        const ActionSpec spec =
            sample_action_spec(category_id, canvas, canvas, length, rng);
        const SynthResult r =
            synth_action_clip(spec, canvas, canvas, length, rng.next_u64());
        py::dict ann;
        ann["category_id"] = r.annotation.category_id;
        ann["h1_bits"] = py::cast(std::vector<int>(
            r.annotation.h1_bits.begin(), r.annotation.h1_bits.end()));
        ann["h2_bits"] = py::cast(std::vector<int>(
            r.annotation.h2_bits.begin(), r.annotation.h2_bits.end()));
        const Cuboid& v = r.annotation.volume;
        ann["volume"] = py::make_tuple(v.cx, v.cy, v.ct, v.w, v.h, v.l);
        return py::make_tuple(to_numpy(r.clip), ann);
      },
      py::arg("category_id"), py::arg("canvas") = 72, py::arg("length") = 32,
      py::arg("seed") = 0,
      "Render one aligned action clip; returns (clip, annotation)");

  // ------------------------------------------------------------------- model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def_static("toy", &ModelConfig::toy, py::arg("categories"))
      .def_static("paper", &ModelConfig::paper, py::arg("categories"))
      .def_static("tiny", &ModelConfig::tiny, py::arg("categories"))
      .def_readwrite("num_categories", &ModelConfig::num_categories)
      .def_readwrite("include_background", &ModelConfig::include_background)
      .def_readwrite("lambda1", &ModelConfig::lambda1)
      .def_readwrite("lambda2", &ModelConfig::lambda2)
      .def_readwrite("beta", &ModelConfig::beta)
      .def_readonly("input_c", &ModelConfig::input_c)
      .def_readonly("input_t", &ModelConfig::input_t)
      .def_readonly("input_h", &ModelConfig::input_h)
      .def_readonly("input_w", &ModelConfig::input_w)
      .def("num_classes", &ModelConfig::num_classes)
      .def("__repr__", [](const ModelConfig& c) {
        return "<ModelConfig " + std::to_string(c.input_c) + "x" +
               std::to_string(c.input_t) + "x" + std::to_string(c.input_h) +
               "x" + std::to_string(c.input_w) + ", " +
               std::to_string(c.num_classes()) + " classes>";
      });
  m.def("profile_config", &profile_config, py::arg("profile"),
        py::arg("categories"), "ModelConfig for a named profile");
  m.def(
      "plan_layers",
      [](const ModelConfig& cfg) {
        py::list out;
        for (const LayerInfo& li : plan_layers(cfg)) {
          out.append(py::make_tuple(li.name, li.output.dims, li.param_count));
        }
        return out;
      },
      py::arg("config"),
      "Layer-by-layer (name, single-sample output shape, parameter count)");

  py::class_<Model>(m, "Model")
      .def_static("build", &Model::build, py::arg("config"), py::arg("seed"),
                  "Fresh model with seeded initialization")
      .def_static(
          "load",
          [](const std::string& path) {
            Model::Loaded l = Model::load_checkpoint(path);
            return py::make_tuple(std::move(l.model), l.iteration, l.seed);
          },
          py::arg("path"), "Returns (model, iteration, seed)")
      .def("save", &Model::save_checkpoint, py::arg("path"),
           py::arg("iteration") = 0, py::arg("seed") = 0)
      .def("config", &Model::config,
           py::return_value_policy::reference_internal)
      .def(
          "forward",
          [](const Model& self, const NpArray& batch) {
            return heads_to_dict(self.forward(to_tensor(batch)));
          },
          py::arg("batch"), "Head outputs for a (N, C, T, H, W) batch")
      .def(
          "layer_output",
          [](const Model& self, const NpArray& batch,
             const std::string& layer) {
            return to_numpy(self.layer_output(to_tensor(batch), layer));
          },
          py::arg("batch"), py::arg("layer"))
      .def(
          "loss",
          [](const Model& self, const NpArray& batch,
             const std::vector<int>& categories, const NpArray& h1,
             const NpArray& h2, const NpArray& loc) {
            return loss_to_dict(
                self.loss(to_tensor(batch), to_targets(categories, h1, h2, loc)));
          },
          py::arg("batch"), py::arg("categories"), py::arg("h1"),
          py::arg("h2"), py::arg("loc"))
      .def(
          "train_step",
          [](Model& self, const NpArray& batch,
             const std::vector<int>& categories, const NpArray& h1,
             const NpArray& h2, const NpArray& loc, double lr,
             double momentum) {
            return loss_to_dict(
                self.train_step(to_tensor(batch),
                                to_targets(categories, h1, h2, loc), lr,
                                momentum));
          },
          py::arg("batch"), py::arg("categories"), py::arg("h1"),
          py::arg("h2"), py::arg("loc"), py::arg("lr") = 0.005,
          py::arg("momentum") = 0.9)
      .def(
          "parameters",
          [](Model& self) {
            py::list out;
            for (const auto& p : self.parameters())
              out.append(py::make_tuple(p.name, to_numpy(*p.value)));
            return out;
          },
          "List of (name, value) pairs")
      .def("compress_fc", &Model::compress_fc, py::arg("fc1_rank"),
           py::arg("fc2_rank"))
      .def("reset_class_head", &Model::reset_class_head,
           py::arg("num_categories"), py::arg("include_background"),
           py::arg("seed"));

  // ----------------------------------------------------------------- parsing
  m.def(
      "propose",
      [](int64_t width, int64_t height, int64_t frames, double stride) {
        py::list out;
        for (const Proposal& p : sliding_window_proposals(
                 "video", width, height, frames,
                 default_proposal_scales(width, height, frames), stride,
                 stride, stride)) {
          out.append(py::make_tuple(p.x, p.y, p.t, p.w, p.h, p.l));
        }
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("frames"),
      py::arg("stride") = 0.5,
      "Sliding-window proposal centers and extents (x, y, t, w, h, l)");
  m.def(
      "parse_video",
      [](const Model& model, const NpArray& video,
         const std::vector<std::array<double, 6>>& proposals, double nms_iou,
         int64_t batch_size, double flow_alpha, int flow_iterations,
         bool zero_motion) {
        std::vector<Proposal> props;
        props.reserve(proposals.size());
        for (const auto& v : proposals) {
          Proposal p;
          p.video_id = "video";
          p.x = v[0];
          p.y = v[1];
          p.t = v[2];
          p.w = v[3];
          p.h = v[4];
          p.l = v[5];
          props.push_back(p);
        }
        ParseConfig pc;
        const ModelConfig& mc = model.config();
        pc.input.in_t = mc.input_t;
        pc.input.in_h = mc.input_h;
        pc.input.in_w = mc.input_w;
        pc.input.flow_alpha = flow_alpha;
        pc.input.flow_iterations = flow_iterations;
        pc.input.zero_motion = zero_motion;
        pc.nms_iou = nms_iou;
        pc.batch_size = batch_size;
        py::list out;
        for (const Detection& d :
             parse_video(model, "video", to_tensor(video), props, pc)) {
          out.append(detection_to_dict(d));
        }
        return out;
      },
      py::arg("model"), py::arg("video"), py::arg("proposals"),
      py::arg("nms_iou") = 0.3, py::arg("batch_size") = 20,
      py::arg("flow_alpha") = 0.06, py::arg("flow_iterations") = 40,
      py::arg("zero_motion") = false,
      "Detect actions in a (T, H, W, 3) video; proposals are "
      "(x, y, t, w, h, l) tuples");
  m.def(
      "iou_3d",
      [](const std::array<double, 6>& a, const std::array<double, 6>& b) {
        return iou_3d(to_cuboid(a), to_cuboid(b));
      },
      py::arg("a"), py::arg("b"),
      "Cuboid overlap for (cx, cy, ct, w, h, l) tuples");

  // -------------------------------------------------------------- evaluation
  m.def(
      "average_precision",
      [](const std::vector<int>& flags, int64_t num_gts) {
        std::vector<uint8_t> f(flags.begin(), flags.end());
        return average_precision(f, num_gts);
      },
      py::arg("ranked_tp_flags"), py::arg("num_ground_truths"));
  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        std::vector<uint8_t> l(labels.begin(), labels.end());
        return roc_auc(scores, l);
      },
      py::arg("scores"), py::arg("labels"),
      "Rank AUC; None when one class is absent");

  // --------------------------------------------------------------- gradcheck
  m.def(
      "run_gradient_checks",
      [](uint64_t seed, int instances, const std::string& perturb) {
        GradCheckOptions opt;
        opt.seed = seed;
        opt.instances = instances;
        opt.perturb = perturb;
        py::list out;
        for (const GradCheckEntry& e : run_gradient_checks(opt)) {
          py::dict d;
          d["name"] = e.name;
          d["max_rel_err"] = e.max_rel_err;
          d["tolerance"] = e.tolerance;
          d["pass"] = e.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 7, py::arg("instances") = 4, py::arg("perturb") = "",
      "Analytic vs numeric gradients; one entry per check");

  // ------------------------------------------------------------------ config
  m.def(
      "canonical_config",
      [](const std::string& text) {
        return parse_run_config(text).canonical_text();
      },
      py::arg("text"),
      "Validate run-config text and return the complete canonical form");
}
