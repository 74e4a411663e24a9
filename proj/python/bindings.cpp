#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qkd/cli.hpp"
#include "qkd/distill.hpp"
#include "qkd/error.hpp"
#include "qkd/evalkit.hpp"
#include "qkd/models.hpp"
#include "qkd/pipeline.hpp"
#include "qkd/quantum.hpp"
#include "qkd/signal.hpp"

namespace py = pybind11;
using namespace qkd;

namespace {

py::dict param_counts() {
  Rng init(0);
  py::dict d;
  for (auto k : {models::StudentKind::cnn1d, models::StudentKind::resnet1d})
    d[py::str(std::string(models::student_id(k)))] = models::make_classifier(k, init)->count_params();
  const models::Autoencoder ae(init);
  d["ae_vqc_circuit"] = quantum::efficient_su2_param_count();
  d["ae_vqc_encoder"] = ae.encoder_param_count();
  d["ae_vqc_autoencoder"] = ae.count_params();
  return d;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge distillation from a classical teacher into CNN, ResNet and quantum students";

  py::register_exception<Error>(m, "QkdError", PyExc_ValueError);

  py::class_<signal::EcgWindow>(m, "Window")
      .def(py::init<>())
      .def_readwrite("samples", &signal::EcgWindow::samples)
      .def_readwrite("label", &signal::EcgWindow::label)
      .def_readwrite("source_id", &signal::EcgWindow::source_id)
      .def("__repr__", [](const signal::EcgWindow& w) {
        return "Window(label=" + std::to_string(w.label) + ", source_id='" + w.source_id + "')";
      });

  py::class_<signal::WaveletCoeffs>(m, "WaveletCoeffs")
      .def_readonly("approx", &signal::WaveletCoeffs::approx)
      .def_readonly("details", &signal::WaveletCoeffs::details)
      .def_readonly("levels", &signal::WaveletCoeffs::levels)
      .def_readonly("signal_length", &signal::WaveletCoeffs::signal_length)
      .def_property_readonly("wavelet", [](const signal::WaveletCoeffs& c) {
        return std::string(signal::wavelet_name(c.wavelet));
      });

  m.def(
      "dwt",
      [](const std::vector<double>& x, const std::string& wavelet, int levels) {
        return signal::dwt_forward(x, signal::parse_wavelet(wavelet), levels);
      },
      py::arg("signal"), py::arg("wavelet") = "db4", py::arg("levels") = 4);
  m.def("idwt", &signal::dwt_inverse, py::arg("coeffs"));
  m.def(
      "denoise",
      [](const std::vector<double>& x, const std::string& wavelet, int levels) {
        return signal::denoise(std::span<const double>(x), signal::parse_wavelet(wavelet), levels);
      },
      py::arg("signal"), py::arg("wavelet") = "db4", py::arg("levels") = 4);

  m.def(
      "synthesize",
      [](std::size_t n, double balance, double sigma, std::uint64_t seed) {
        pipeline::SynthSpec spec{n, balance, sigma, seed};
        pipeline::validate(spec);
        return pipeline::synthesize(spec);
      },
      py::arg("n_windows") = 2000, py::arg("balance") = 0.5, py::arg("sigma") = 0.2, py::kw_only(),
      py::arg("seed"));
  m.def("read_windows", &signal::read_window_csv, py::arg("path"));
  m.def(
      "write_windows",
      [](const std::string& path, const std::vector<signal::EcgWindow>& w) { signal::write_window_csv(path, w); },
      py::arg("path"), py::arg("windows"));

  m.def("param_counts", &param_counts);

  m.def(
      "kd_loss",
      [](double teacher, double student, int label, double alpha, double temperature) {
        return distill::kd_loss(distill::class_logits(teacher), distill::class_logits(student), label,
                                {alpha, temperature});
      },
      py::arg("teacher_logit"), py::arg("student_logit"), py::arg("label"), py::arg("alpha"),
      py::arg("temperature"));
  m.def(
      "kd_loss_grad",
      [](double teacher, double student, int label, double alpha, double temperature) {
        return distill::kd_loss_grad(teacher, student, label, {alpha, temperature});
      },
      py::arg("teacher_logit"), py::arg("student_logit"), py::arg("label"), py::arg("alpha"),
      py::arg("temperature"));

  m.attr("N_QUBITS") = quantum::kQubits;
  m.attr("N_THETA") = quantum::efficient_su2_param_count();
  m.def(
      "vqc_forward",
      [](const std::vector<double>& x, const std::vector<double>& theta, int shots, std::uint64_t seed) {
        quantum::VqcOptions opt;
        opt.shots = shots;
        Rng rng(seed);
        return quantum::vqc_forward(x, theta, opt, shots > 0 ? &rng : nullptr);
      },
      py::arg("x"), py::arg("theta"), py::arg("shots") = 0, py::arg("seed") = 0);

  py::class_<eval::Metrics>(m, "Metrics")
      .def_readonly("accuracy", &eval::Metrics::accuracy)
      .def_readonly("precision", &eval::Metrics::precision)
      .def_readonly("recall", &eval::Metrics::recall)
      .def_readonly("f1", &eval::Metrics::f1)
      .def("__repr__", [](const eval::Metrics& x) {
        std::ostringstream s;
        s << "Metrics(accuracy=" << x.accuracy << ", precision=" << x.precision << ", recall=" << x.recall
          << ", f1=" << x.f1 << ")";
        return s.str();
      });
  m.def(
      "binary_metrics",
      [](const std::vector<int>& pred, const std::vector<int>& labels) { return eval::binary_metrics(pred, labels); },
      py::arg("predictions"), py::arg("labels"));

  py::class_<eval::FoldSplit>(m, "FoldSplit")
      .def_readonly("fold_index", &eval::FoldSplit::fold_index)
      .def_readonly("train_indices", &eval::FoldSplit::train_indices)
      .def_readonly("val_indices", &eval::FoldSplit::val_indices);
  m.def(
      "stratified_kfold",
      [](const std::vector<int>& labels, int k, std::uint64_t seed, const std::vector<std::string>& groups) {
        return eval::stratified_kfold(labels, k, seed, groups);
      },
      py::arg("labels"), py::arg("k"), py::arg("seed"), py::arg("groups") = std::vector<std::string>{});

  m.def("run_cli", &run_cli, py::arg("args"),
        "Runs one qkd subcommand and returns (exit_code, stdout, stderr).");
}
