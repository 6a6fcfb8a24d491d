#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hemera/error.hpp"
#include "hemera/metrics.hpp"
#include "hemera/pipeline.hpp"
#include "hemera/report.hpp"
#include "hemera/tokenizer.hpp"

namespace py = pybind11;
using namespace hemera;

PYBIND11_MODULE(_hemera, m) {
  m.doc() = "Bindings for the hemera genotype transformer pipeline.";

  static py::exception<Error> hemera_error(m, "HemeraError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(hemera_error, e.what());
    }
  });

  std::vector<std::string> vocabulary(kVocabulary.begin(), kVocabulary.end());
  m.attr("VOCABULARY") = py::tuple(py::cast(vocabulary));
  m.attr("NAN_ID") = kNanId;
  m.attr("CLS_ID") = kClsId;
  m.attr("MASK_ID") = kMaskId;

  m.def("token_to_id", [](const std::string& token) { return static_cast<int>(token_to_id(token)); });
  m.def("id_to_token", [](int id) {
    if (id < 0 || id >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, "token id " + std::to_string(id));
    return std::string(id_to_token(static_cast<TokenId>(id)));
  });

  m.def("auc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
        py::arg("scores"), py::arg("labels"));
  m.def(
      "youden_threshold",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        const auto y = youden_threshold(scores, labels);
        return py::dict(py::arg("threshold") = y.threshold, py::arg("j") = y.j,
                        py::arg("sensitivity") = y.sensitivity, py::arg("specificity") = y.specificity);
      },
      py::arg("scores"), py::arg("labels"));

  py::class_<AttributionRecord>(m, "AttributionRecord")
      .def_readonly("chromosome", &AttributionRecord::chromosome)
      .def_readonly("position", &AttributionRecord::position)
      .def_property_readonly("token", [](const AttributionRecord& r) { return static_cast<int>(r.token); })
      .def_readonly("mean_attribution", &AttributionRecord::mean_attribution)
      .def_readonly("carrier_count", &AttributionRecord::carrier_count)
      .def_readonly("fold_count", &AttributionRecord::fold_count)
      .def("__repr__", [](const AttributionRecord& r) {
        return "AttributionRecord(" + std::to_string(r.chromosome) + ", " + std::to_string(r.position) + ", " +
               std::string(id_to_token(r.token)) + ", " + std::to_string(r.mean_attribution) + ")";
      });

  py::class_<LocusMatch>(m, "LocusMatch")
      .def_readonly("chromosome", &LocusMatch::chromosome)
      .def_readonly("attributed_position", &LocusMatch::attributed_position)
      .def_readonly("known_position", &LocusMatch::known_position)
      .def_readonly("source", &LocusMatch::source)
      .def_readonly("distance", &LocusMatch::distance);

  py::class_<KnownLocus>(m, "KnownLocus")
      .def_readonly("chromosome", &KnownLocus::chromosome)
      .def_readonly("position", &KnownLocus::position)
      .def_readonly("source", &KnownLocus::source);

  m.def("read_attribution_table", [](const std::filesystem::path& p) { return read_attribution_table(p); });
  m.def("read_known_loci", [](const std::filesystem::path& p) { return parse_known_loci(p); });
  m.def("proximity_match", &proximity_match, py::arg("records"), py::arg("known"),
        py::arg("window") = kDefaultWindowBp);

  m.def("subcommands", &subcommands);
  m.def("resolve_config", [](const std::string& config_json) {
    return to_json(run_config_from_json(nlohmann::json::parse(config_json))).dump();
  });
  m.def(
      "run",
      [](const std::string& name, const std::string& config_json) {
        const auto config = run_config_from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        std::filesystem::create_directories(config.paths.output_dir);
        run_subcommand(name, config);
      },
      py::arg("subcommand"), py::arg("config_json"));
}
