// Copyright 2026 The TargetDrop Authors.
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

// Python bindings. Tensors cross the boundary as float64 numpy arrays in
// the library layout (H, W, C) or (N, H, W, C), copied on every call.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "targetdrop/attention.hpp"
#include "targetdrop/baselines.hpp"
#include "targetdrop/data.hpp"
#include "targetdrop/gradcheck.hpp"
#include "targetdrop/nn.hpp"
#include "targetdrop/target_drop.hpp"

namespace py = pybind11;
using namespace targetdrop;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  return Matrix(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> keep_array(const DropMask& m) {
  py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width),
                                 static_cast<py::ssize_t>(m.channels)});
  std::copy(m.keep.begin(), m.keep.end(), out.mutable_data());
  return out;
}

DropConfig drop_config(double gamma, std::size_t k, bool train) {
  DropConfig c;
  c.gamma = gamma;
  c.block_size = k;
  c.phase = train ? Phase::kTrain : Phase::kInference;
  c.validate();
  return c;
}

ImageDataset dataset_from(const Array& images, std::vector<std::size_t> labels, std::size_t classes) {
  ImageDataset ds;
  ds.images = to_tensor(images);
  ds.labels = std::move(labels);
  ds.classes = classes;
  for (auto l : ds.labels) ds.classes = std::max(ds.classes, l + 1);
  ds.validate();
  return ds;
}

py::dict epoch_dict(const EpochLog& e) {
  py::dict d;
  d["epoch"] = e.epoch;
  d["lr"] = e.lr;
  d["train_loss"] = e.train_loss;
  d["train_acc"] = e.train_acc;
  d["test_acc"] = e.test_acc;
  return d;
}

}  // namespace

PYBIND11_MODULE(_targetdrop, m) {
  m.doc() = "TargetDrop core library";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<AttentionParams>(m, "AttentionParams")
      .def_readonly("channels", &AttentionParams::channels)
      .def_readonly("reduction_ratio", &AttentionParams::reduction_ratio)
      .def_readonly("seed", &AttentionParams::seed)
      .def_property(
          "w1", [](const AttentionParams& p) { return to_array(p.w1); },
          [](AttentionParams& p, const Array& a) {
            Matrix w = to_matrix(a);
            if (w.rows() != p.w1.rows() || w.cols() != p.w1.cols()) throw ShapeError("w1 shape mismatch");
            p.w1 = std::move(w);
          })
      .def_property(
          "w2", [](const AttentionParams& p) { return to_array(p.w2); },
          [](AttentionParams& p, const Array& a) {
            Matrix w = to_matrix(a);
            if (w.rows() != p.w2.rows() || w.cols() != p.w2.cols()) throw ShapeError("w2 shape mismatch");
            p.w2 = std::move(w);
          })
      .def_property_readonly("parameter_count", &AttentionParams::parameter_count);

  m.def("init_attention", &init_attention, py::arg("channels"), py::arg("r") = 16, py::arg("seed") = 0,
        py::arg("trainable") = false, "Glorot-initialised channel attention gate.");
  m.def(
      "attention_map", [](const Array& u, const AttentionParams& p) { return attention_map(to_tensor(u), p); },
      py::arg("u"), py::arg("params"), "Per-channel scores M = sigmoid(W2 relu(W1 GAP(u))).");

  py::class_<DropMask>(m, "DropMask")
      .def_property_readonly("keep", &keep_array)
      .def_readonly("tags", &DropMask::tags)
      .def_readonly("kept_counts", &DropMask::kept_counts)
      .def_readonly("scale", &DropMask::scale)
      .def_property_readonly("shape", [](const DropMask& d) { return d.shape(); })
      .def_property_readonly("regions", [](const DropMask& d) {
        py::list out;
        for (const auto& r : d.regions) {
          py::dict x;
          x["channel"] = r.channel;
          x["center"] = py::make_tuple(r.center.row, r.center.col);
          x["bounds"] = py::make_tuple(r.bounds.h1, r.bounds.h2, r.bounds.w1, r.bounds.w2);
          out.append(x);
        }
        return out;
      });

  m.def("target_count", &target_count, py::arg("gamma"), py::arg("channels"));
  m.def(
      "select_target_channels",
      [](const std::vector<double>& scores, double gamma) { return select_target_channels(scores, gamma).tags; },
      py::arg("scores"), py::arg("gamma"), "0/1 tags for the floor(gamma C) highest-scoring channels.");
  m.def(
      "build_mask",
      [](const Array& u, const std::vector<double>& scores, double gamma, std::size_t k) {
        return build_mask(to_tensor(u), scores, drop_config(gamma, k, true));
      },
      py::arg("u"), py::arg("scores"), py::arg("gamma") = 0.15, py::arg("k") = 5);
  m.def(
      "apply_and_normalize",
      [](const Array& u, const DropMask& mask) { return to_array(apply_and_normalize(to_tensor(u), mask)); },
      py::arg("u"), py::arg("mask"));
  m.def(
      "apply_mask", [](const Array& u, const DropMask& mask) { return to_array(apply_mask(to_tensor(u), mask)); },
      py::arg("u"), py::arg("mask"));
  m.def(
      "targetdrop_forward",
      [](const Array& u, const AttentionParams& p, double gamma, std::size_t k, bool train) {
        auto res = targetdrop_forward(to_tensor(u), p, drop_config(gamma, k, train));
        return py::make_tuple(to_array(res.output), res.masks);
      },
      py::arg("u"), py::arg("params"), py::arg("gamma") = 0.15, py::arg("k") = 5, py::arg("train") = true,
      "Returns (output, masks); masks is empty in the inference phase.");
  m.def(
      "targetdrop_backward",
      [](const Array& grad, const std::vector<DropMask>& masks) {
        return to_array(targetdrop_backward(to_tensor(grad), masks));
      },
      py::arg("grad_out"), py::arg("masks"));

  m.def(
      "dropout_mask", [](const Shape& s, double rate, std::uint64_t seed) { return dropout_mask(s, rate, seed); },
      py::arg("shape"), py::arg("rate"), py::arg("seed") = 0);
  m.def(
      "spatialdropout_mask",
      [](const Shape& s, double rate, std::uint64_t seed) { return spatialdropout_mask(s, rate, seed); },
      py::arg("shape"), py::arg("rate"), py::arg("seed") = 0);
  m.def(
      "dropblock_mask",
      [](const Shape& s, double seed_rate, std::size_t block, std::uint64_t seed) {
        return dropblock_mask(s, seed_rate, block, seed);
      },
      py::arg("shape"), py::arg("seed_rate"), py::arg("block") = 5, py::arg("seed") = 0);
  m.def("cutout_mask", &cutout_mask, py::arg("height"), py::arg("width"), py::arg("size"), py::arg("seed") = 0);
  m.def(
      "mask_stats",
      [](const DropMask& mask) {
        const auto s = mask_stats(mask);
        py::dict d;
        d["drop_fraction"] = s.drop_fraction;
        d["per_channel_fractions"] = s.per_channel_fractions;
        d["mean_block_size"] = s.mean_block_size;
        d["contiguity"] = s.contiguity;
        return d;
      },
      py::arg("mask"));

  m.def(
      "param_overhead",
      [](const std::vector<std::size_t>& channels, std::size_t r, std::size_t base) {
        const auto o = param_overhead(channels, r, base);
        return py::make_tuple(o.added, o.fraction);
      },
      py::arg("channels"), py::arg("r"), py::arg("base_parameters"), "Returns (added, fraction).");

  auto gradcheck_dict = [](const GradCheckResult& r) {
    py::dict d;
    d["name"] = r.name;
    d["trials"] = r.trials;
    d["max_rel_error"] = r.max_rel_error;
    d["tolerance"] = r.tolerance;
    d["passed"] = r.passed;
    return d;
  };
  m.def(
      "run_gradcheck",
      [gradcheck_dict](const std::string& name, double eps, std::size_t trials, std::uint64_t seed) {
        GradCheckOptions o;
        o.eps = eps;
        o.trials = trials;
        o.seed = seed;
        return gradcheck_dict(run_gradcheck(name, o));
      },
      py::arg("name"), py::arg("eps") = 1e-3, py::arg("trials") = 50, py::arg("seed") = 7);
  m.def(
      "run_gradcheck_suite",
      [gradcheck_dict](double eps, std::size_t trials, std::uint64_t seed) {
        GradCheckOptions o;
        o.eps = eps;
        o.trials = trials;
        o.seed = seed;
        py::list out;
        for (const auto& r : run_gradcheck_suite(o)) out.append(gradcheck_dict(r));
        return out;
      },
      py::arg("eps") = 1e-3, py::arg("trials") = 50, py::arg("seed") = 7);

  py::class_<ImageDataset>(m, "ImageDataset")
      .def(py::init(&dataset_from), py::arg("images"), py::arg("labels"), py::arg("classes") = 0)
      .def_property_readonly("images", [](const ImageDataset& d) { return to_array(d.images); })
      .def_readonly("labels", &ImageDataset::labels)
      .def_readonly("classes", &ImageDataset::classes)
      .def("__len__", &ImageDataset::size);
  m.def(
      "make_toy_dataset",
      [](std::size_t classes, std::size_t n_per_class, std::size_t image_size, std::uint64_t seed,
         const std::string& split) {
        ToyDatasetConfig c;
        c.classes = classes;
        c.n_per_class = n_per_class;
        c.image_size = image_size;
        c.seed = seed;
        c.validate();
        return make_toy_dataset(c, split);
      },
      py::arg("classes") = 10, py::arg("n_per_class") = 200, py::arg("image_size") = 16, py::arg("seed") = 1,
      py::arg("split") = "train");

  py::class_<TinyCNN>(m, "TinyCNN")
      .def(py::init([](std::size_t classes, std::size_t image_size, std::size_t in_channels,
                       const std::string& method, double gamma, std::size_t k, std::size_t r, double rate,
                       std::uint64_t seed) {
             ModelConfig mc;
             mc.classes = classes;
             mc.image_size = image_size;
             mc.in_channels = in_channels;
             DropLayerConfig dc;
             dc.method = parse_drop_method(method);
             dc.targetdrop.gamma = gamma;
             dc.targetdrop.block_size = k;
             dc.reduction_ratio = r;
             dc.rate = rate;
             return TinyCNN(mc, dc, seed);
           }),
           py::arg("classes") = 10, py::arg("image_size") = 16, py::arg("in_channels") = 3,
           py::arg("method") = "none", py::arg("gamma") = 0.15, py::arg("k") = 5, py::arg("r") = 16,
           py::arg("rate") = 0.1, py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &TinyCNN::parameter_count)
      .def_property_readonly("gate_parameter_count", &TinyCNN::gate_parameter_count)
      .def(
          "logits", [](const TinyCNN& model, const Array& image) { return predict_logits(model, to_tensor(image)); },
          py::arg("image"));

  m.def(
      "learning_rate",
      [](std::size_t epoch, std::size_t epochs, double lr, double decay, const std::vector<double>& milestones) {
        TrainConfig c;
        c.epochs = epochs;
        c.initial_lr = lr;
        c.lr_decay = decay;
        c.milestones = milestones;
        return learning_rate(c, epoch);
      },
      py::arg("epoch"), py::arg("epochs"), py::arg("lr") = 0.1, py::arg("decay") = 0.2,
      py::arg("milestones") = std::vector<double>{0.4, 0.6, 0.8});
  m.def(
      "train",
      [](TinyCNN& model, const ImageDataset& train_set, const ImageDataset& test_set, std::size_t epochs,
         std::size_t batch_size, double lr, const std::vector<double>& milestones, bool augment,
         std::uint64_t seed) {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.initial_lr = lr;
        c.milestones = milestones;
        c.augment = augment;
        c.seed = seed;
        c.validate();
        std::vector<EpochLog> logs;
        {
          py::gil_scoped_release release;
          logs = train(model, train_set, test_set, c);
        }
        py::list out;
        for (const auto& e : logs) out.append(epoch_dict(e));
        return out;
      },
      py::arg("model"), py::arg("train_set"), py::arg("test_set"), py::arg("epochs") = 5,
      py::arg("batch_size") = 32, py::arg("lr") = 0.005, py::arg("milestones") = std::vector<double>{0.6, 0.8, 0.9},
      py::arg("augment") = false, py::arg("seed") = 0, "Trains in place; returns one dict per epoch.");
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("data"));
  m.def(
      "class_activation_map",
      [](const Array& features, const std::vector<double>& weights, std::size_t out_h, std::size_t out_w) {
        return to_array(class_activation_map(to_tensor(features), weights, out_h, out_w));
      },
      py::arg("features"), py::arg("class_weights"), py::arg("out_h"), py::arg("out_w"));
  m.def(
      "compute_cam",
      [](const TinyCNN& model, const Array& image, std::size_t class_index) {
        return to_array(compute_cam(model, to_tensor(image), class_index));
      },
      py::arg("model"), py::arg("image"), py::arg("class_index"));
}
