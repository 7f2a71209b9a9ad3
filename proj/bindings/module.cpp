// Python bindings for the core operations: data model, bound estimation,
// confidence intervals, testing, multiplicity control and the synthetic
// process. File formats and the CLI stay on the C++ side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "twinfal/bounds.hpp"
#include "twinfal/intervals.hpp"
#include "twinfal/regions.hpp"
#include "twinfal/reporting.hpp"
#include "twinfal/synth.hpp"
#include "twinfal/testing.hpp"
#include "twinfal/trajectory.hpp"

namespace py = pybind11;
using namespace twinfal;

PYBIND11_MODULE(_twinfal, m) {
    m.doc() = "Falsification of digital twins via longitudinal causal bounds";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

    py::class_<SchemaSpec>(m, "SchemaSpec")
        .def(py::init<>())
        .def_readwrite("horizon", &SchemaSpec::horizon)
        .def_readwrite("dims", &SchemaSpec::dims)
        .def_readwrite("action_cardinalities", &SchemaSpec::action_cardinalities)
        .def("validate", &SchemaSpec::validate)
        .def("to_json", &SchemaSpec::to_json)
        .def_static("from_json", &SchemaSpec::from_json);

    py::class_<ObservedTrajectory::Step>(m, "Step")
        .def(py::init<>())
        .def_readwrite("action", &ObservedTrajectory::Step::action)
        .def_readwrite("obs", &ObservedTrajectory::Step::obs);

    py::class_<ObservedTrajectory>(m, "ObservedTrajectory")
        .def(py::init<>())
        .def_readwrite("x0", &ObservedTrajectory::x0)
        .def_readwrite("steps", &ObservedTrajectory::steps);

    py::class_<TwinTrajectory>(m, "TwinTrajectory")
        .def(py::init<>())
        .def_readwrite("x0", &TwinTrajectory::x0)
        .def_readwrite("actions", &TwinTrajectory::actions)
        .def_readwrite("states", &TwinTrajectory::states);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("schema", &Dataset::schema)
        .def_readwrite("records", &Dataset::records)
        .def("__len__", &Dataset::size);

    py::class_<TwinDataset>(m, "TwinDataset")
        .def(py::init<>())
        .def_readwrite("schema", &TwinDataset::schema)
        .def_readwrite("actions", &TwinDataset::actions)
        .def_readwrite("records", &TwinDataset::records)
        .def("__len__", &TwinDataset::size);

    m.def("load_observational", &load_observational, py::arg("path"), py::arg("schema"));
    m.def("load_twin", &load_twin, py::arg("path"), py::arg("schema"), py::arg("expected_actions"));
    m.def("save_observational", &save_observational, py::arg("data"), py::arg("path"));
    m.def("save_twin", &save_twin, py::arg("data"), py::arg("path"));
    m.def("load_schema", &load_schema, py::arg("path"));
    m.def("split_holdout", &split_holdout, py::arg("data"), py::arg("fraction"), py::arg("seed"));

    py::enum_<Direction>(m, "Direction").value("LO", Direction::Lo).value("UP", Direction::Up);

    py::class_<IntervalConstraint>(m, "IntervalConstraint")
        .def(py::init<>())
        .def_readwrite("feature", &IntervalConstraint::feature)
        .def_readwrite("lower", &IntervalConstraint::lower)
        .def_readwrite("upper", &IntervalConstraint::upper)
        .def_readwrite("lower_closed", &IntervalConstraint::lower_closed)
        .def_readwrite("upper_closed", &IntervalConstraint::upper_closed);

    py::class_<BoxRegion>(m, "BoxRegion")
        .def(py::init<>())
        .def_readwrite("constraints", &BoxRegion::constraints)
        .def("contains", &BoxRegion::contains);

    py::class_<RegionSequence>(m, "RegionSequence")
        .def(py::init<>())
        .def_readwrite("regions", &RegionSequence::regions);

    py::class_<OutcomeSpec>(m, "OutcomeSpec")
        .def(py::init<>())
        .def_readwrite("time", &OutcomeSpec::time)
        .def_readwrite("feature", &OutcomeSpec::feature)
        .def_readwrite("y_lo", &OutcomeSpec::y_lo)
        .def_readwrite("y_up", &OutcomeSpec::y_up)
        .def("value", &OutcomeSpec::value);

    py::class_<Hypothesis>(m, "Hypothesis")
        .def(py::init<>())
        .def_readwrite("t", &Hypothesis::t)
        .def_readwrite("outcome", &Hypothesis::outcome)
        .def_readwrite("actions", &Hypothesis::actions)
        .def_readwrite("regions", &Hypothesis::regions)
        .def_readwrite("direction", &Hypothesis::direction)
        .def_readwrite("id", &Hypothesis::id)
        .def("validate", &Hypothesis::validate);

    m.def("load_hypotheses", &load_hypotheses, py::arg("path"));
    m.def("save_hypotheses", &save_hypotheses, py::arg("hypotheses"), py::arg("path"));
    m.def("quantile_nearest_rank", &quantile_nearest_rank, py::arg("values"), py::arg("q"));

    py::class_<BinSpec>(m, "BinSpec")
        .def(py::init([](int feature, const std::string& kind, int count) {
                 BinSpec b;
                 b.feature = feature;
                 b.kind = kind == "categorical" ? BinSpec::Kind::Categorical
                                                : BinSpec::Kind::Quantile;
                 b.count = count;
                 return b;
             }),
             py::arg("feature"), py::arg("kind") = "quantile", py::arg("count") = 2)
        .def_readonly_static("OUTCOME_FEATURE", &BinSpec::kOutcomeFeature);

    py::class_<GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_readwrite("quantile_lo", &GeneratorConfig::quantile_lo)
        .def_readwrite("quantile_up", &GeneratorConfig::quantile_up)
        .def_readwrite("bin_plan", &GeneratorConfig::bin_plan)
        .def_readwrite("outcome_features", &GeneratorConfig::outcome_features)
        .def_readwrite("timesteps", &GeneratorConfig::timesteps)
        .def_readwrite("min_support", &GeneratorConfig::min_support);

    py::class_<GeneratorResult>(m, "GeneratorResult")
        .def_readonly("hypotheses", &GeneratorResult::hypotheses)
        .def_property_readonly("skipped", [](const GeneratorResult& r) { return r.skipped.size(); });

    m.def("generate_hypotheses", &generate_hypotheses, py::arg("holdout"), py::arg("config"));

    py::class_<BoundEstimate>(m, "BoundEstimate")
        .def_readonly("n", &BoundEstimate::n)
        .def_readonly("n_match", &BoundEstimate::n_match)
        .def_readonly("mu_lo", &BoundEstimate::mu_lo)
        .def_readonly("mu_up", &BoundEstimate::mu_up)
        .def_readonly("n_hat", &BoundEstimate::n_hat)
        .def_readonly("mu_hat", &BoundEstimate::mu_hat)
        .def_readonly("y_lo", &BoundEstimate::y_lo)
        .def_readonly("y_up", &BoundEstimate::y_up)
        .def_property_readonly("width", &BoundEstimate::width)
        .def_property_readonly("match_fraction", &BoundEstimate::match_fraction);

    m.def("match_length", &match_length, py::arg("trajectory"), py::arg("actions"));
    m.def("estimate_bounds", &estimate_bounds, py::arg("data"), py::arg("twin"), py::arg("hypothesis"));
    m.def("estimate_obs_bounds", &estimate_obs_bounds, py::arg("data"), py::arg("hypothesis"));
    m.def("manski_hypothesis", &manski_hypothesis, py::arg("hypothesis"));

    py::enum_<IntervalBackend>(m, "IntervalBackend")
        .value("HOEFFDING", IntervalBackend::Hoeffding)
        .value("BOOT_REVPERC", IntervalBackend::BootstrapReversePercentile)
        .value("BOOT_PERC", IntervalBackend::BootstrapPercentile);

    m.def("hoeffding_delta", &hoeffding_delta, py::arg("y_lo"), py::arg("y_up"), py::arg("alpha"),
          py::arg("n"));

    py::enum_<GateReason>(m, "GateReason")
        .value("NONE", GateReason::None)
        .value("NO_MATCHING_OBS", GateReason::NoMatchingObs)
        .value("NO_TWIN_IN_REGION", GateReason::NoTwinInRegion)
        .value("BOOTSTRAP_MIN_N", GateReason::BootstrapMinN);

    py::class_<TestOptions>(m, "TestOptions")
        .def(py::init<>())
        .def_readwrite("backend", &TestOptions::backend)
        .def_readwrite("alpha", &TestOptions::alpha)
        .def_readwrite("resamples", &TestOptions::resamples)
        .def_readwrite("seed", &TestOptions::seed)
        .def_readwrite("workers", &TestOptions::workers);

    py::class_<TestResult>(m, "TestResult")
        .def_readonly("hypothesis_id", &TestResult::hypothesis_id)
        .def_readonly("outcome_feature", &TestResult::outcome_feature)
        .def_readonly("t", &TestResult::t)
        .def_readonly("direction", &TestResult::direction)
        .def_readonly("gate", &TestResult::gate)
        .def_readonly("p_value", &TestResult::p_value)
        .def_readonly("q_bound", &TestResult::q_bound)
        .def_readonly("q_twin", &TestResult::q_twin)
        .def_readonly("estimate", &TestResult::estimate)
        .def_readonly("reject", &TestResult::multiplicity_reject);

    py::class_<TwinStore>(m, "TwinStore")
        .def(py::init<>())
        .def("add", &TwinStore::add)
        .def("__len__", &TwinStore::size);

    m.def("run_tests", &run_tests, py::arg("data"), py::arg("twins"), py::arg("hypotheses"),
          py::arg("options"));

    py::enum_<MultiplicityMethod>(m, "MultiplicityMethod")
        .value("HOLM", MultiplicityMethod::HolmBonferroni)
        .value("BY", MultiplicityMethod::BenjaminiYekutieli);

    m.def(
        "holm_bonferroni",
        [](const std::vector<double>& p, double level) { return holm_bonferroni(p, level).reject; },
        py::arg("p_values"), py::arg("level"));
    m.def(
        "benjamini_yekutieli",
        [](const std::vector<double>& p, double level) {
            return benjamini_yekutieli(p, level).reject;
        },
        py::arg("p_values"), py::arg("level"));
    m.def(
        "apply_multiplicity",
        [](std::vector<TestResult>& results, MultiplicityMethod method, double level) {
            apply_multiplicity(results, method, level);
            return results;
        },
        py::arg("results"), py::arg("method"), py::arg("level"));

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("horizon", &SynthConfig::horizon)
        .def_readwrite("dims", &SynthConfig::dims)
        .def_readwrite("action_counts", &SynthConfig::action_counts)
        .def_readwrite("p_u", &SynthConfig::p_u)
        .def_readwrite("effect", &SynthConfig::effect)
        .def_readwrite("bias", &SynthConfig::bias)
        .def_readwrite("noise", &SynthConfig::noise)
        .def_readwrite("seed", &SynthConfig::seed)
        .def("schema", &SynthConfig::schema)
        .def("to_json", &SynthConfig::to_json);

    py::class_<TwinMode>(m, "TwinMode")
        .def_static("correct", &TwinMode::correct)
        .def_static("biased", &TwinMode::biased, py::arg("delta"))
        .def_static("variance_inflated", &TwinMode::variance_inflated, py::arg("kappa"));

    py::class_<OracleEstimate>(m, "OracleEstimate")
        .def_readonly("mean", &OracleEstimate::mean)
        .def_readonly("stderr", &OracleEstimate::stderr_)
        .def_readonly("accepted", &OracleEstimate::accepted)
        .def_readonly("draws", &OracleEstimate::draws);

    m.def("generate_observational", &generate_observational, py::arg("config"), py::arg("n"),
          py::arg("seed"));
    m.def("sample_x0_pool", &sample_x0_pool, py::arg("data"), py::arg("n"), py::arg("seed"));
    m.def("generate_twin", &generate_twin, py::arg("config"), py::arg("mode"), py::arg("x0_pool"),
          py::arg("actions"), py::arg("seed"));
    m.def("interventional_oracle", &interventional_oracle, py::arg("config"), py::arg("actions"),
          py::arg("regions"), py::arg("outcome"), py::arg("n_draws"), py::arg("seed"));
}
