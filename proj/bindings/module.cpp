#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "gfv/cli.hpp"
#include "gfv/error.hpp"
#include "gfv/io.hpp"
#include "gfv/metrics.hpp"
#include "gfv/recipes.hpp"
#include "gfv/synth.hpp"
#include "gfv/vq.hpp"

namespace py = pybind11;

namespace {

py::dict clip_info(const std::string& path) {
  const gfv::VideoClip clip = gfv::io::read_clip(path);
  py::dict d;
  d["label"] = clip.label;
  d["frames"] = clip.t();
  d["height"] = clip.frames[0].h;
  d["width"] = clip.frames[0].w;
  d["channels"] = clip.frames[0].ch;
  return d;
}

py::bytes clip_frame(const std::string& path, int index) {
  const gfv::VideoClip clip = gfv::io::read_clip(path);
  if (index < 0 || index >= clip.t())
    throw gfv::IndexError(path + ": frame " + std::to_string(index) + " outside [0," +
                          std::to_string(clip.t()) + ")");
  const gfv::Image& f = clip.frames[index];
  return py::bytes(reinterpret_cast<const char*>(f.pix.data()), f.pix.size());
}

}  // namespace

PYBIND11_MODULE(_gfv, m) {
  m.doc() = "Conditional grid-frame video generation toolkit";

  py::register_exception<gfv::Error>(m, "GfvError", PyExc_RuntimeError);

  m.def("run", &gfv::cli_run, py::arg("args"),
        "Run one gfv subcommand in-process; args exclude the program name. "
        "Returns the exit code (0 ok, 1 usage, 2 runtime failure).");
  m.def("run_recipe", &gfv::run_recipe, py::arg("name"), py::arg("out_dir"),
        py::arg("seed") = 0,
        "Run a named experiment recipe under out_dir; returns the exit code.");
  m.def("recipe_names", &gfv::recipe_names, "Names of the built-in recipes.");

  m.def("make_dataset", &gfv::make_dataset, py::arg("per_class"), py::arg("seed"),
        py::arg("frames"), py::arg("height"), py::arg("width"), py::arg("out_dir"),
        "Write the synthetic labeled clip dataset; returns the manifest path.");
  m.def("num_motion_classes", &gfv::num_motion_classes);

  m.def(
      "label_oracle",
      [](const std::string& path) { return gfv::label_oracle(gfv::io::read_clip(path)); },
      py::arg("clip_path"),
      "Analytic motion label of a clip file; -1 when unclassifiable.");
  m.def(
      "temporal_consistency",
      [](const std::string& path) {
        return gfv::temporal_consistency(gfv::io::read_clip(path));
      },
      py::arg("clip_path"),
      "Mean absolute inter-frame difference of a clip file, scaled to [0,1].");
  m.def("clip_info", &clip_info, py::arg("clip_path"),
        "Header fields of a clip file as a dict.");
  m.def("clip_frame", &clip_frame, py::arg("clip_path"), py::arg("index"),
        "Raw row-major bytes of one frame of a clip file.");

  m.def("frechet_distance", &gfv::frechet_distance, py::arg("a"), py::arg("b"),
        "Fréchet distance between Gaussian fits of two feature-vector sets.");
  m.def(
      "psnr",
      [](const std::string& a, const std::string& b) {
        const gfv::VideoClip ca = gfv::io::read_clip(a);
        const gfv::VideoClip cb = gfv::io::read_clip(b);
        if (ca.t() != cb.t())
          throw gfv::ShapeError(a + " and " + b + ": frame counts differ");
        double sum = 0.0;
        for (int i = 0; i < ca.t(); ++i) sum += gfv::psnr(ca.frames[i], cb.frames[i]);
        return sum / ca.t();
      },
      py::arg("clip_a"), py::arg("clip_b"),
      "Mean per-frame PSNR between two clip files, dB (99 dB cap).");
}
