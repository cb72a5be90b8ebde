#include "acvmlr/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acvmlr/dataset_io.hpp"
#include "acvmlr/error.hpp"
#include "acvmlr/report.hpp"
#include "acvmlr/sweep.hpp"

namespace acvmlr::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ParseError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
}

datagen::Variant parse_variant(const json& v)
{
    if (v.is_string()) return parse_variant(json{{"type", v}});
    reject_unknown(v, {"type", "r_common", "corr", "classes", "omega"}, "variant");
    const std::string type = v.value("type", "plain");
    if (type == "plain") {
        reject_unknown(v, {"type"}, "plain variant");
        return datagen::Plain{};
    }
    if (type == "common_components") {
        reject_unknown(v, {"type", "r_common"}, "common_components variant");
        return datagen::CommonComponents{v.value("r_common", 0.9)};
    }
    if (type == "correlated_noise") {
        reject_unknown(v, {"type", "corr"}, "correlated_noise variant");
        return datagen::CorrelatedNoise{v.value("corr", 0.9)};
    }
    if (type == "amplified") {
        reject_unknown(v, {"type", "classes", "omega"}, "amplified variant");
        datagen::Amplified a;
        a.omega = v.value("omega", 100.0);
        for (int c : v.at("classes").get<std::vector<int>>()) {
            if (c < 1) throw ParseError("amplified classes are 1-based");
            a.classes.push_back(c - 1);
        }
        return a;
    }
    throw ParseError("unknown variant type '" + type + "'");
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

io::Format pick_format(const std::string& name, const std::string& path)
{
    if (name.empty() || name == "auto") return io::format_from_path(path);
    if (name == "csv") return io::Format::csv;
    if (name == "libsvm") return io::Format::libsvm;
    throw ParseError("unknown format '" + name + "'");
}

std::optional<int> parse_kfold(const std::string& s)
{
    if (s == "loo" || s == "LOO" || s == "0") return 0;
    try {
        std::size_t used = 0;
        const int k = std::stoi(s, &used);
        if (used == s.size() && k >= 2) return k;
    } catch (const std::exception&) {
    }
    throw ParseError("literal CV fold count must be an integer >= 2 or 'loo', got '" + s + "'");
}

void parse_estimators(const std::string& list, SweepConfig& config)
{
    config.run_acv = config.run_saacv = false;
    std::istringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "acv")
            config.run_acv = true;
        else if (item == "saacv")
            config.run_saacv = true;
        else if (item.rfind("literal:", 0) == 0)
            config.literal_k = parse_kfold(item.substr(8));
        else if (item == "literal")
            config.literal_k = 0;
        else
            throw ParseError("unknown estimator '" + item + "'");
    }
}

struct GenerateArgs {
    std::string spec;
    std::string out;
    std::string format;
    std::string weights;
};

struct SweepArgs {
    std::string data;
    std::string format;
    std::string out;
    std::string estimators = "acv,saacv";
    std::string kfold;
    std::vector<double> lambdas;
    int n_classes = 0;
    SweepConfig config;
    bool no_timings = false;
};

struct ReportArgs {
    std::string in;
    std::string format = "table";
};

int cmd_generate(const GenerateArgs& a, std::ostream& out)
{
    const datagen::SynthSpec spec = parse_synth_spec(read_file(a.spec));
    const WeightMatrix w0 = datagen::gen_true_weights(spec);
    const Dataset data = datagen::gen_dataset(w0, spec);
    io::write_dataset(a.out, data, pick_format(a.format, a.out));
    const std::string weights_path = a.weights.empty() ? a.out + ".weights.csv" : a.weights;
    std::ofstream wf(weights_path);
    if (!wf) throw Error("cannot write " + weights_path);
    io::write_matrix(wf, w0);
    out << "wrote " << data.n_samples() << " samples x " << data.n_features() << " features, " << data.n_classes
        << " classes to " << a.out << " (weights: " << weights_path << ")\n";
    return kExitOk;
}

int cmd_sweep(SweepArgs a, std::ostream& out, std::ostream& err)
{
    parse_estimators(a.estimators, a.config);
    if (!a.kfold.empty()) a.config.literal_k = parse_kfold(a.kfold);
    a.config.lambda_grid = a.lambdas;
    a.config.record_timings = !a.no_timings;

    const Dataset data = io::read_dataset(a.data, pick_format(a.format, a.data), a.n_classes);
    const CvReport rep = run_sweep(data, a.config);
    if (a.out.empty())
        report::write_json(out, rep);
    else
        report::save(a.out, rep);
    if (!rep.any_converged()) {
        err << "error: the solver did not converge at any lambda point\n";
        return kExitNoConvergence;
    }
    return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out)
{
    const CvReport rep = report::load(a.in);
    if (a.format == "csv")
        report::write_csv(out, rep);
    else if (a.format == "table")
        report::write_table(out, rep);
    else if (a.format == "json")
        report::write_json(out, rep);
    else
        throw ParseError("unknown report format '" + a.format + "'");
    return kExitOk;
}

} // namespace

datagen::SynthSpec parse_synth_spec(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("spec is not valid JSON: ") + e.what());
    }
    try {
        reject_unknown(j, {"n_features", "n_classes", "alpha", "rho0", "sigma_xi2", "seed", "variant"}, "spec");
        datagen::SynthSpec s;
        s.n_features = j.value("n_features", s.n_features);
        s.n_classes = j.value("n_classes", s.n_classes);
        s.alpha = j.value("alpha", s.alpha);
        s.rho0 = j.value("rho0", s.rho0);
        s.sigma_xi2 = j.value("sigma_xi2", s.sigma_xi2);
        s.seed = j.value("seed", s.seed);
        if (j.contains("variant")) s.variant = parse_variant(j.at("variant"));
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed spec: ") + e.what());
    } catch (const ContractViolation& e) {
        throw ParseError(std::string("invalid spec: ") + e.what());
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Approximate leave-one-out CV for sparse multinomial logistic regression", "acvmlr"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic dataset and its true weights");
    g->add_option("--spec", gen.spec, "JSON generator spec")->required();
    g->add_option("--out", gen.out, "Dataset path")->required();
    g->add_option("--format", gen.format, "csv, libsvm or auto (by extension)");
    g->add_option("--weights", gen.weights, "True-weight sidecar path (default <out>.weights.csv)");

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "Fit a lambda path and estimate the LOO error at each point");
    s->add_option("--data", sw.data, "Dataset (CSV or LIBSVM)")->required();
    s->add_option("--format", sw.format, "csv, libsvm or auto (by extension)");
    s->add_option("--n-classes", sw.n_classes, "Class count when some classes are absent from the file");
    s->add_option("--out", sw.out, "Report path (default stdout)");
    s->add_option("--eta", sw.config.eta, "Elastic-net mixing, 1 = pure l1")->capture_default_str();
    s->add_option("--delta", sw.config.tol_delta, "Solver tolerance")->capture_default_str();
    s->add_option("--theta", sw.config.theta, "SAACV fixed-point tolerance")->capture_default_str();
    s->add_option("--max-iter", sw.config.max_iter, "Solver sweep limit")->capture_default_str();
    s->add_option("--max-sweeps", sw.config.max_sweeps, "SAACV sweep limit")->capture_default_str();
    s->add_option("--estimators", sw.estimators, "Comma list of acv, saacv, literal:<k|loo>")->capture_default_str();
    s->add_option("--kfold", sw.kfold, "Literal CV folds (integer or loo)");
    s->add_flag("--stratify", sw.config.stratify, "Stratify literal CV folds by class");
    s->add_flag("--cold-start", sw.config.literal_cold_start, "Do not warm-start fold refits");
    s->add_option("--workers", sw.config.workers, "Parallel literal CV fold fits")->capture_default_str();
    s->add_option("--seed", sw.config.seed, "Fold assignment seed")->capture_default_str();
    s->add_option("--lambdas", sw.lambdas, "Explicit decreasing lambda grid")->delimiter(',');
    s->add_option("--n-lambda", sw.config.n_lambda, "Default grid size")->capture_default_str();
    s->add_option("--decades", sw.config.decades, "Default grid span below lambda_max")->capture_default_str();
    s->add_flag("--rescale-by-class", sw.config.rescale_by_class, "Equalize class feature norms, scale l1 per class");
    s->add_flag("--add-constant-feature", sw.config.add_constant_feature, "Append a penalized all-ones column");
    s->add_flag("--no-timings", sw.no_timings, "Zero wall-clock fields so reports diff identical");

    ReportArgs rp;
    auto* r = app.add_subcommand("report", "Render a sweep report");
    r->add_option("--in", rp.in, "Report path")->required();
    r->add_option("--format", rp.format, "table, csv or json")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    }

    try {
        if (g->parsed()) return cmd_generate(gen, out);
        if (s->parsed()) return cmd_sweep(sw, out, err);
        return cmd_report(rp, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const ContractViolation& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace acvmlr::cli
