#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "acvmlr/acv.hpp"
#include "acvmlr/cli.hpp"
#include "acvmlr/datagen.hpp"
#include "acvmlr/dataset_io.hpp"
#include "acvmlr/error.hpp"
#include "acvmlr/literalcv.hpp"
#include "acvmlr/report.hpp"
#include "acvmlr/saacv.hpp"
#include "acvmlr/solver.hpp"
#include "acvmlr/sweep.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace acvmlr;

namespace {

Dataset to_dataset(const Matrix& x, const std::vector<int>& y, std::optional<int> n_classes)
{
    int l = n_classes.value_or(0);
    for (int v : y) l = std::max(l, v + 1);
    return make_dataset(x, y, l);
}

FitResult to_fit(const WeightMatrix& w, double lambda_tilde, double eta)
{
    FitResult fr;
    fr.weights = w;
    fr.hyper = {lambda_tilde, eta, {}};
    fr.converged = true;
    return fr;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Approximate leave-one-out CV for sparse multinomial logistic regression";

    // Translators run newest first, so register the base class before its subclasses.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("weights", &FitResult::weights)
        .def_property_readonly("lambda_tilde", [](const FitResult& f) { return f.hyper.lambda_tilde; })
        .def_property_readonly("eta", [](const FitResult& f) { return f.hyper.eta; })
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("kkt_violation", &FitResult::kkt_violation);

    py::class_<AcvResult>(m, "AcvResult")
        .def_readonly("looe", &AcvResult::looe)
        .def_readonly("per_sample_nll", &AcvResult::per_sample_nll)
        .def_readonly("loo_overlaps", &AcvResult::loo_overlaps)
        .def_readonly("zero_modes_removed", &AcvResult::zero_modes_removed)
        .def_readonly("ill_conditioned_samples", &AcvResult::ill_conditioned_samples)
        .def_property_readonly("cost", [](const AcvResult& a) { return a.cost.total(); });

    m.def(
        "fit",
        [](const Matrix& x, const std::vector<int>& y, double lambda_tilde, double eta, std::optional<int> n_classes,
           double tol_delta, long max_iter, std::optional<WeightMatrix> warm_start,
           std::vector<double> class_l1_factors) {
            const Dataset d = to_dataset(x, y, n_classes);
            FitOptions opt;
            opt.tol_delta = tol_delta;
            opt.max_iter = max_iter;
            py::gil_scoped_release release;
            return fit(d, {lambda_tilde, eta, std::move(class_l1_factors)}, opt, warm_start ? &*warm_start : nullptr);
        },
        "X"_a, "y"_a, "lambda_tilde"_a, "eta"_a = 1.0, "n_classes"_a = py::none(), "tol_delta"_a = 1e-8,
        "max_iter"_a = 100000, "warm_start"_a = py::none(), "class_l1_factors"_a = std::vector<double>{},
        "Fit the penalized model; labels are 0-based.");

    m.def(
        "acv",
        [](const Matrix& x, const std::vector<int>& y, const WeightMatrix& w, double lambda_tilde, double eta,
           std::optional<int> n_classes) {
            const Dataset d = to_dataset(x, y, n_classes);
            py::gil_scoped_release release;
            return acv(d, to_fit(w, lambda_tilde, eta));
        },
        "X"_a, "y"_a, "weights"_a, "lambda_tilde"_a, "eta"_a = 1.0, "n_classes"_a = py::none(),
        "Per-sample approximate LOO estimate from a single fit.");

    m.def(
        "saacv",
        [](const Matrix& x, const std::vector<int>& y, const WeightMatrix& w, double lambda_tilde, double eta,
           std::optional<int> n_classes, double theta, long max_sweeps) {
            const Dataset d = to_dataset(x, y, n_classes);
            SaacvOptions opt;
            opt.theta = theta;
            opt.max_sweeps = max_sweeps;
            SaacvResult r;
            {
                py::gil_scoped_release release;
                r = saacv(d, to_fit(w, lambda_tilde, eta), opt);
            }
            return py::dict("looe"_a = r.estimate.looe, "loo_overlaps"_a = r.estimate.loo_overlaps,
                            "converged"_a = r.state.converged, "sweeps"_a = r.state.iterations,
                            "residual"_a = r.state.final_residual, "cost"_a = r.state.cost);
        },
        "X"_a, "y"_a, "weights"_a, "lambda_tilde"_a, "eta"_a = 1.0, "n_classes"_a = py::none(), "theta"_a = 1e-6,
        "max_sweeps"_a = 1000, "Self-averaging approximate LOO estimate.");

    m.def(
        "literal_cv",
        [](const Matrix& x, const std::vector<int>& y, double lambda_tilde, double eta, std::optional<int> k,
           std::optional<int> n_classes, std::uint64_t seed, bool stratify, int workers) {
            const Dataset d = to_dataset(x, y, n_classes);
            LiteralCvOptions opt;
            opt.stratify = stratify;
            opt.workers = workers;
            LiteralCvResult r;
            {
                py::gil_scoped_release release;
                r = literal_cv(d, {lambda_tilde, eta, {}}, k.value_or(static_cast<int>(d.n_samples())), seed, opt);
            }
            return py::dict("eps_cv"_a = r.eps_cv, "fold_loss"_a = r.fold_loss, "all_valid"_a = r.all_valid);
        },
        "X"_a, "y"_a, "lambda_tilde"_a, "eta"_a = 1.0, "k"_a = py::none(), "n_classes"_a = py::none(), "seed"_a = 0,
        "stratify"_a = false, "workers"_a = 1, "k-fold CV by refitting; k=None is leave-one-out.");

    m.def(
        "lambda_max",
        [](const Matrix& x, const std::vector<int>& y, double eta, std::optional<int> n_classes) {
            return lambda_max(to_dataset(x, y, n_classes), eta);
        },
        "X"_a, "y"_a, "eta"_a = 1.0, "n_classes"_a = py::none());
    m.def("log_grid", &log_grid, "hi"_a, "decades"_a, "count"_a);

    m.def(
        "generate",
        [](const std::string& spec_json) {
            const auto spec = cli::parse_synth_spec(spec_json);
            const WeightMatrix w0 = datagen::gen_true_weights(spec);
            const Dataset d = datagen::gen_dataset(w0, spec);
            return py::make_tuple(d.features, d.labels, w0);
        },
        "spec_json"_a, "Synthetic dataset from a JSON spec; returns (X, y, true_weights).");

    m.def(
        "read_dataset",
        [](const std::string& path, std::optional<int> n_classes) {
            const Dataset d = io::read_dataset(path, io::format_from_path(path), n_classes.value_or(0));
            return py::make_tuple(d.features, d.labels, d.n_classes);
        },
        "path"_a, "n_classes"_a = py::none());
    m.def(
        "write_dataset",
        [](const std::string& path, const Matrix& x, const std::vector<int>& y, std::optional<int> n_classes) {
            io::write_dataset(path, to_dataset(x, y, n_classes), io::format_from_path(path));
        },
        "path"_a, "X"_a, "y"_a, "n_classes"_a = py::none());

    py::class_<SweepConfig>(m, "SweepConfig")
        .def(py::init<>())
        .def_readwrite("lambda_grid", &SweepConfig::lambda_grid)
        .def_readwrite("n_lambda", &SweepConfig::n_lambda)
        .def_readwrite("decades", &SweepConfig::decades)
        .def_readwrite("eta", &SweepConfig::eta)
        .def_readwrite("run_acv", &SweepConfig::run_acv)
        .def_readwrite("run_saacv", &SweepConfig::run_saacv)
        .def_readwrite("literal_k", &SweepConfig::literal_k)
        .def_readwrite("literal_cold_start", &SweepConfig::literal_cold_start)
        .def_readwrite("stratify", &SweepConfig::stratify)
        .def_readwrite("workers", &SweepConfig::workers)
        .def_readwrite("seed", &SweepConfig::seed)
        .def_readwrite("tol_delta", &SweepConfig::tol_delta)
        .def_readwrite("theta", &SweepConfig::theta)
        .def_readwrite("max_iter", &SweepConfig::max_iter)
        .def_readwrite("max_sweeps", &SweepConfig::max_sweeps)
        .def_readwrite("rescale_by_class", &SweepConfig::rescale_by_class)
        .def_readwrite("add_constant_feature", &SweepConfig::add_constant_feature)
        .def_readwrite("record_timings", &SweepConfig::record_timings);

    m.def(
        "sweep_json",
        [](const Matrix& x, const std::vector<int>& y, const SweepConfig& config, std::optional<int> n_classes) {
            const Dataset d = to_dataset(x, y, n_classes);
            std::ostringstream out;
            {
                py::gil_scoped_release release;
                report::write_json(out, run_sweep(d, config));
            }
            return out.str();
        },
        "X"_a, "y"_a, "config"_a, "n_classes"_a = py::none(), "Run a lambda sweep; returns the report as JSON text.");

    m.attr("REPORT_SCHEMA_VERSION") = kReportSchemaVersion;
}
