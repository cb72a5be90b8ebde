#include "acvmlr/report.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace acvmlr::report {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::optional<double> get_opt(const json& j, const char* key)
{
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ParseError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ParseError("unknown field '" + key + "' in " + where);
    for (const auto& key : allowed)
        if (!j.contains(key)) throw ParseError("missing field '" + key + "' in " + where);
}

json record_to_json(const LambdaRecord& r)
{
    return {
        {"lambda_tilde", r.lambda_tilde},
        {"status", r.status},
        {"training_error", r.training_error},
        {"eps_acv", opt(r.eps_acv)},
        {"eps_saacv", opt(r.eps_saacv)},
        {"eps_literal", opt(r.eps_literal)},
        {"ned_acv", opt(r.ned_acv)},
        {"ned_saacv", opt(r.ned_saacv)},
        {"active_set_size", r.active_set_size},
        {"zero_modes_removed", r.zero_modes_removed},
        {"kkt_violation", r.kkt_violation},
        {"solver_sweeps", r.solver_sweeps},
        {"saacv_sweeps", r.saacv_sweeps},
        {"acv_cost", r.acv_cost},
        {"saacv_cost", r.saacv_cost},
        {"flags", r.flags},
        {"wall_times",
         {{"fit", r.times.fit}, {"acv", r.times.acv}, {"saacv", r.times.saacv}, {"literal", r.times.literal}}},
    };
}

LambdaRecord record_from_json(const json& j)
{
    check_keys(j,
               {"lambda_tilde", "status", "training_error", "eps_acv", "eps_saacv", "eps_literal", "ned_acv",
                "ned_saacv", "active_set_size", "zero_modes_removed", "kkt_violation", "solver_sweeps",
                "saacv_sweeps", "acv_cost", "saacv_cost", "flags", "wall_times"},
               "record");
    LambdaRecord r;
    r.lambda_tilde = j.at("lambda_tilde").get<double>();
    r.status = j.at("status").get<std::string>();
    if (r.status != "converged" && r.status != "not_converged" && r.status != "failed")
        throw ParseError("unknown record status '" + r.status + "'");
    r.training_error = j.at("training_error").get<double>();
    r.eps_acv = get_opt(j, "eps_acv");
    r.eps_saacv = get_opt(j, "eps_saacv");
    r.eps_literal = get_opt(j, "eps_literal");
    r.ned_acv = get_opt(j, "ned_acv");
    r.ned_saacv = get_opt(j, "ned_saacv");
    r.active_set_size = j.at("active_set_size").get<long>();
    r.zero_modes_removed = j.at("zero_modes_removed").get<long>();
    r.kkt_violation = j.at("kkt_violation").get<double>();
    r.solver_sweeps = j.at("solver_sweeps").get<long>();
    r.saacv_sweeps = j.at("saacv_sweeps").get<long>();
    r.acv_cost = j.at("acv_cost").get<std::uint64_t>();
    r.saacv_cost = j.at("saacv_cost").get<std::uint64_t>();
    r.flags = j.at("flags").get<std::vector<std::string>>();
    const auto& t = j.at("wall_times");
    check_keys(t, {"fit", "acv", "saacv", "literal"}, "wall_times");
    r.times = {t.at("fit").get<double>(), t.at("acv").get<double>(), t.at("saacv").get<double>(),
               t.at("literal").get<double>()};
    return r;
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

std::string fmt(const std::optional<double>& v)
{
    return v ? fmt(*v) : std::string();
}

const char* const kCsvHeader =
    "lambda_tilde,status,training_error,eps_acv,eps_saacv,eps_literal,ned_acv,ned_saacv,active_set_size,"
    "zero_modes_removed,time_fit,time_acv,time_saacv,time_literal";

} // namespace

void write_json(std::ostream& out, const CvReport& report)
{
    json records = json::array();
    for (const auto& r : report.records) records.push_back(record_to_json(r));
    json argmin = json::object();
    for (const auto& [name, e] : report.argmin)
        argmin[name] = {{"index", e.index}, {"lambda_tilde", e.lambda_tilde}, {"value", e.value}};
    const auto& p = report.provenance;
    json doc = {
        {"schema_version", report.schema_version},
        {"eta", report.eta},
        {"lambda_grid", report.lambda_grid},
        {"records", records},
        {"argmin", argmin},
        {"total_fit_time", report.total_fit_time},
        {"provenance",
         {{"seed", p.seed},
          {"tol_delta", p.tol_delta},
          {"theta", p.theta},
          {"dataset_digest", p.dataset_digest},
          {"n_samples", p.n_samples},
          {"n_features", p.n_features},
          {"n_classes", p.n_classes},
          {"literal_k", p.literal_k ? json(*p.literal_k) : json(nullptr)},
          {"rescale_by_class", p.rescale_by_class},
          {"class_factors", p.class_factors}}},
    };
    out << doc.dump(2) << '\n';
}

CvReport read_json(std::istream& in)
{
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version")) throw ParseError("report has no schema_version");
    const int version = doc.at("schema_version").get<int>();
    if (version != kReportSchemaVersion)
        throw VersionMismatch("report schema version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kReportSchemaVersion) + ")");
    try {
        check_keys(doc, {"schema_version", "eta", "lambda_grid", "records", "argmin", "total_fit_time", "provenance"},
                   "report");
        CvReport r;
        r.schema_version = version;
        r.eta = doc.at("eta").get<double>();
        r.lambda_grid = doc.at("lambda_grid").get<std::vector<double>>();
        r.total_fit_time = doc.at("total_fit_time").get<double>();
        for (const auto& rec : doc.at("records")) r.records.push_back(record_from_json(rec));
        for (const auto& [name, e] : doc.at("argmin").items()) {
            check_keys(e, {"index", "lambda_tilde", "value"}, "argmin entry");
            r.argmin[name] = {e.at("index").get<int>(), e.at("lambda_tilde").get<double>(), e.at("value").get<double>()};
        }
        const auto& p = doc.at("provenance");
        check_keys(p,
                   {"seed", "tol_delta", "theta", "dataset_digest", "n_samples", "n_features", "n_classes",
                    "literal_k", "rescale_by_class", "class_factors"},
                   "provenance");
        auto& q = r.provenance;
        q.seed = p.at("seed").get<std::uint64_t>();
        q.tol_delta = p.at("tol_delta").get<double>();
        q.theta = p.at("theta").get<double>();
        q.dataset_digest = p.at("dataset_digest").get<std::string>();
        q.n_samples = p.at("n_samples").get<long>();
        q.n_features = p.at("n_features").get<long>();
        q.n_classes = p.at("n_classes").get<int>();
        if (!p.at("literal_k").is_null()) q.literal_k = p.at("literal_k").get<int>();
        q.rescale_by_class = p.at("rescale_by_class").get<bool>();
        q.class_factors = p.at("class_factors").get<std::vector<double>>();
        if (r.lambda_grid.empty() || r.records.empty()) throw ParseError("report has an empty lambda grid");
        if (r.lambda_grid.size() != r.records.size())
            throw ParseError("lambda grid and record array differ in length");
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
}

void save(const std::string& path, const CvReport& report)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_json(out, report);
}

CvReport load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    return read_json(in);
}

void write_csv(std::ostream& out, const CvReport& report)
{
    out << kCsvHeader << '\n';
    for (const auto& r : report.records) {
        out << fmt(r.lambda_tilde) << ',' << r.status << ',' << fmt(r.training_error) << ',' << fmt(r.eps_acv) << ','
            << fmt(r.eps_saacv) << ',' << fmt(r.eps_literal) << ',' << fmt(r.ned_acv) << ',' << fmt(r.ned_saacv) << ','
            << r.active_set_size << ',' << r.zero_modes_removed << ',' << fmt(r.times.fit) << ','
            << fmt(r.times.acv) << ',' << fmt(r.times.saacv) << ',' << fmt(r.times.literal) << '\n';
    }
}

std::vector<LambdaRecord> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("unexpected report CSV header");
    auto cell_opt = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) return std::nullopt;
        return std::stod(s);
    };
    std::vector<LambdaRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() != 14) throw ParseError("report CSV row has " + std::to_string(cells.size()) + " cells");
        LambdaRecord r;
        try {
            r.lambda_tilde = std::stod(cells[0]);
            r.status = cells[1];
            r.training_error = std::stod(cells[2]);
            r.eps_acv = cell_opt(cells[3]);
            r.eps_saacv = cell_opt(cells[4]);
            r.eps_literal = cell_opt(cells[5]);
            r.ned_acv = cell_opt(cells[6]);
            r.ned_saacv = cell_opt(cells[7]);
            r.active_set_size = std::stol(cells[8]);
            r.zero_modes_removed = std::stol(cells[9]);
            r.times = {std::stod(cells[10]), std::stod(cells[11]), std::stod(cells[12]), std::stod(cells[13])};
        } catch (const std::logic_error&) {
            throw ParseError("malformed report CSV row: " + line);
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_table(std::ostream& out, const CvReport& report)
{
    auto col = [](const std::optional<double>& v) {
        std::ostringstream ss;
        if (v)
            ss << std::setprecision(6) << *v;
        else
            ss << "-";
        return ss.str();
    };
    out << std::left << std::setw(14) << "lambda" << std::setw(15) << "status" << std::setw(13) << "train"
        << std::setw(13) << "acv" << std::setw(13) << "saacv" << std::setw(13) << "literal" << std::setw(13)
        << "ned_acv" << std::setw(13) << "ned_saacv" << "|A|\n";
    for (const auto& r : report.records) {
        out << std::left << std::setw(14) << col(r.lambda_tilde) << std::setw(15) << r.status << std::setw(13)
            << col(r.training_error) << std::setw(13) << col(r.eps_acv) << std::setw(13) << col(r.eps_saacv)
            << std::setw(13) << col(r.eps_literal) << std::setw(13) << col(r.ned_acv) << std::setw(13)
            << col(r.ned_saacv) << r.active_set_size << '\n';
    }
    for (const auto& [name, e] : report.argmin)
        out << "argmin " << name << ": lambda=" << col(e.lambda_tilde) << " value=" << col(e.value) << " (index "
            << e.index << ")\n";
}

} // namespace acvmlr::report
