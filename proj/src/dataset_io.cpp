#include "acvmlr/dataset_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "acvmlr/error.hpp"

namespace acvmlr::io {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
    }
}

int parse_label(const std::string& s, std::size_t line_no)
{
    const double v = parse_double(s, line_no);
    if (v != static_cast<int>(v) || v < 1)
        throw ParseError("line " + std::to_string(line_no) + ": label '" + s + "' is not an integer >= 1");
    return static_cast<int>(v);
}

Dataset finish(std::vector<std::vector<double>> rows, std::vector<int> labels, int n_features, int hint)
{
    if (rows.empty()) throw ParseError("dataset has no samples");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    const int l = std::max(max_label, hint);
    Dataset d;
    d.n_classes = l;
    d.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), n_features);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) d.features(r, c) = rows[r][c];
    d.labels.resize(labels.size());
    std::transform(labels.begin(), labels.end(), d.labels.begin(), [](int y) { return y - 1; });
    try {
        d.validate();
    } catch (const ContractViolation& e) {
        throw ParseError(e.what());
    }
    return d;
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

} // namespace

Format format_from_path(const std::string& path)
{
    for (const char* ext : {".svm", ".libsvm", ".txt"}) {
        const std::size_t n = std::strlen(ext);
        if (path.size() >= n && path.compare(path.size() - n, n, ext) == 0) return Format::libsvm;
    }
    return Format::csv;
}

Dataset read_csv(std::istream& in, int n_classes_hint)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    const auto header = split(trim(line), ',');
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end()) throw ParseError("CSV header has no 'label' column");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const int n_features = static_cast<int>(header.size()) - 1;
    if (n_features < 1) throw ParseError("CSV has no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " cells, got " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(n_features);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col)
                labels.push_back(parse_label(cells[c], line_no));
            else
                row.push_back(parse_double(cells[c], line_no));
        }
        rows.push_back(std::move(row));
    }
    return finish(std::move(rows), std::move(labels), n_features, n_classes_hint);
}

void write_csv(std::ostream& out, const Dataset& data)
{
    out << "label";
    for (Eigen::Index i = 0; i < data.n_features(); ++i) out << ",x" << (i + 1);
    out << '\n';
    for (Eigen::Index mu = 0; mu < data.n_samples(); ++mu) {
        out << (data.labels[mu] + 1);
        for (Eigen::Index i = 0; i < data.n_features(); ++i) out << ',' << fmt(data.features(mu, i));
        out << '\n';
    }
}

Dataset read_libsvm(std::istream& in, int n_classes_hint, int n_features_hint)
{
    std::vector<std::vector<std::pair<int, double>>> sparse;
    std::vector<int> labels;
    int n_features = n_features_hint;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        std::istringstream ss(t);
        std::string tok;
        ss >> tok;
        labels.push_back(parse_label(tok, line_no));
        std::vector<std::pair<int, double>> entries;
        while (ss >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw ParseError("line " + std::to_string(line_no) + ": expected idx:val, got '" + tok + "'");
            const double idx = parse_double(tok.substr(0, colon), line_no);
            if (idx < 1 || idx != static_cast<int>(idx))
                throw ParseError("line " + std::to_string(line_no) + ": feature index must be an integer >= 1");
            entries.emplace_back(static_cast<int>(idx) - 1, parse_double(tok.substr(colon + 1), line_no));
            n_features = std::max(n_features, static_cast<int>(idx));
        }
        sparse.push_back(std::move(entries));
    }
    if (n_features < 1) throw ParseError("LIBSVM file has no features");
    std::vector<std::vector<double>> rows(sparse.size(), std::vector<double>(n_features, 0.0));
    for (std::size_t r = 0; r < sparse.size(); ++r)
        for (const auto& [i, v] : sparse[r]) rows[r][i] = v;
    return finish(std::move(rows), std::move(labels), n_features, n_classes_hint);
}

void write_libsvm(std::ostream& out, const Dataset& data)
{
    for (Eigen::Index mu = 0; mu < data.n_samples(); ++mu) {
        out << (data.labels[mu] + 1);
        for (Eigen::Index i = 0; i < data.n_features(); ++i) {
            const double v = data.features(mu, i);
            // Keep the last column so the feature count survives a round trip.
            if (v != 0.0 || i + 1 == data.n_features()) out << ' ' << (i + 1) << ':' << fmt(v);
        }
        out << '\n';
    }
}

Dataset read_dataset(const std::string& path, Format format, int n_classes_hint)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    return format == Format::csv ? read_csv(in, n_classes_hint) : read_libsvm(in, n_classes_hint);
}

void write_dataset(const std::string& path, const Dataset& data, Format format)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    if (format == Format::csv)
        write_csv(out, data);
    else
        write_libsvm(out, data);
}

void write_matrix(std::ostream& out, const Matrix& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(trim(line), ',')) row.push_back(parse_double(cell, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("line " + std::to_string(line_no) + ": ragged matrix row");
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

Dataset add_constant_feature(const Dataset& data)
{
    Dataset out = data;
    out.features.conservativeResize(Eigen::NoChange, data.n_features() + 1);
    out.features.col(data.n_features()).setOnes();
    return out;
}

std::uint64_t digest(const Dataset& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < n; ++k) {
            h ^= bytes[k];
            h *= 0x100000001b3ULL;
        }
    };
    const std::int64_t shape[3] = {data.n_samples(), data.n_features(), data.n_classes};
    mix(shape, sizeof shape);
    for (int y : data.labels) {
        const std::int32_t v = y;
        mix(&v, sizeof v);
    }
    for (Eigen::Index mu = 0; mu < data.n_samples(); ++mu)
        for (Eigen::Index i = 0; i < data.n_features(); ++i) {
            const double v = data.features(mu, i);
            mix(&v, sizeof v);
        }
    return h;
}

std::string digest_hex(const Dataset& data)
{
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << digest(data);
    return ss.str();
}

} // namespace acvmlr::io
