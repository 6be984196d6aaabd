// Python bindings. Configs cross the boundary as YAML text and reports as
// JSON text, so the Python side never mirrors the C++ records.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semv2x/config.hpp"
#include "semv2x/costmodel.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/pipeline.hpp"
#include "semv2x/probe.hpp"
#include "semv2x/semlink.hpp"

namespace py = pybind11;
using namespace semv2x;

namespace {

ExperimentConfig config_from(const std::string& yaml) { return parse_config(yaml); }

py::dict quantize(py::array_t<float, py::array::c_style | py::array::forcecast> vec, const std::string& fmt) {
  if (vec.ndim() != 1) throw py::value_error("expected a 1-D array");
  const auto q = quantize_embedding({vec.data(), static_cast<std::size_t>(vec.size())}, parse_quant_format(fmt));
  py::dict d;
  d["payload"] = py::bytes(reinterpret_cast<const char*>(q.payload.data()), q.payload.size());
  d["scale"] = q.scale;
  d["format"] = std::string(to_string(q.format));
  d["dim"] = q.dim;
  return d;
}

py::array_t<double> round_trip(py::array_t<float, py::array::c_style | py::array::forcecast> vec,
                               const std::string& fmt) {
  if (vec.ndim() != 1) throw py::value_error("expected a 1-D array");
  const auto q = quantize_embedding({vec.data(), static_cast<std::size_t>(vec.size())}, parse_quant_format(fmt));
  const auto back = dequantize_embedding(q);
  return py::array_t<double>(static_cast<py::ssize_t>(back.size()), back.data());
}

py::tuple attention(py::array_t<double, py::array::c_style | py::array::forcecast> query,
                    py::array_t<double, py::array::c_style | py::array::forcecast> tokens) {
  if (query.ndim() != 1 || tokens.ndim() != 2) throw py::value_error("expected a 1-D query and 2-D tokens");
  TokenMatrix z(static_cast<std::size_t>(tokens.shape(0)), static_cast<std::size_t>(tokens.shape(1)));
  std::copy(tokens.data(), tokens.data() + tokens.size(), z.values().begin());
  const auto r = cross_attention({query.data(), static_cast<std::size_t>(query.size())}, z);
  return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(r.pooled.size()), r.pooled.data()),
                        py::array_t<double>(static_cast<py::ssize_t>(r.weights.size()), r.weights.data()));
}

py::dict costs(const std::string& yaml) {
  const auto r = cost_report(config_from(yaml));
  py::dict d;
  d["tokens"] = r.tokens;
  d["flops_block"] = r.flops_block;
  d["flops_encoder"] = r.flops_encoder;
  d["flops_probe"] = r.flops_probe;
  d["flops_probe_effective"] = r.flops_probe_effective;
  d["flops_total"] = r.flops_total;
  d["activation_elems"] = r.activation_elems;
  d["infer_time_s"] = r.infer_time_s;
  return d;
}

py::dict metrics(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
  const auto m = compute_metrics({tp, fp, tn, fn});
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

std::string e2e(const std::string& yaml, const std::string& post, std::int64_t gap) {
  const auto cfg = config_from(yaml);
  E2eOptions opts;
  if (!post.empty()) opts.conditions = {{parse_post_process(post), gap}};
  py::gil_scoped_release release;
  return report_to_json(cmd_e2e(cfg, opts));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semantic V2X collision-prediction simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("default_config", [] { return serialize_config(ExperimentConfig{}); }, "Default config as YAML.");
  m.def("normalize_config", [](const std::string& y) { return serialize_config(config_from(y)); },
        py::arg("yaml"), "Parse, validate and re-serialize a config.");
  m.def("config_hash", [](const std::string& y) { return config_hash(config_from(y)); }, py::arg("yaml") = "");

  m.def("raw_payload_bytes", [](std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
    ClipSpec clip;
    clip.n_frames = n;
    clip.orig_height_px = h;
    clip.orig_width_px = w;
    clip.channels = c;
    return raw_payload_bytes(clip);
  }, py::arg("n_frames"), py::arg("height"), py::arg("width"), py::arg("channels") = 3);
  m.def("semantic_payload_bytes",
        [](std::int64_t dim, const std::string& fmt) { return semantic_payload_bytes(dim, parse_quant_format(fmt)); },
        py::arg("dim"), py::arg("format"));
  m.def("tx_latency_s", [](std::int64_t bytes, double bw, double snr_db, const std::string& mod) {
    return tx_latency_s(bytes, {bw, snr_db, parse_modulation(mod)});
  }, py::arg("payload_bytes"), py::arg("bandwidth_hz") = 20e6, py::arg("snr_db") = 12.0, py::arg("modulation") = "bpsk");
  m.def("meets_v2x_deadline", &meets_v2x_deadline, py::arg("latency_s"));

  m.def("quantize", &quantize, py::arg("vec"), py::arg("format"));
  m.def("round_trip", &round_trip, py::arg("vec"), py::arg("format"), "Quantize then dequantize.");
  m.def("cross_attention", &attention, py::arg("query"), py::arg("tokens"), "Returns (pooled, weights).");
  m.def("cost_report", &costs, py::arg("yaml") = "");
  m.def("compute_metrics", &metrics, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
  m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));

  m.def("payload_table", [](const std::string& y) { return cmd_payload(config_from(y)); }, py::arg("yaml") = "");
  m.def("latency_table", [](const std::string& y) { return cmd_latency(config_from(y)); }, py::arg("yaml") = "");
  m.def("flops_table", [](const std::string& y) { return cmd_flops({config_from(y)}); }, py::arg("yaml") = "");
  m.def("run_e2e", &e2e, py::arg("yaml") = "", py::arg("post") = "", py::arg("gap") = 8,
        "End-to-end experiment; returns the report as JSON. With `post` only that condition runs.");
}
