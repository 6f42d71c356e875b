#include "gpmcmc_app/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace gpmcmc::app {

using nlohmann::json;

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

bool parse_row(const std::string& line, std::vector<double>& row) {
    row.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (end > p && (end[-1] == '\r' || end[-1] == ' ')) --end;
    if (p == end) return false;
    while (p <= end) {
        const char* comma = std::find(p, end, ',');
        double v = 0.0;
        const auto res = std::from_chars(p, comma, v);
        if (res.ec != std::errc() || res.ptr != comma) {
            // from_chars does not accept "inf"/"nan" spelled by other writers.
            const std::string token(p, comma);
            if (token == "inf") v = std::numeric_limits<double>::infinity();
            else if (token == "-inf") v = -std::numeric_limits<double>::infinity();
            else return false;
        }
        row.push_back(v);
        if (comma == end) break;
        p = comma + 1;
    }
    return true;
}

}  // namespace

void write_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header) {
    if (!header.empty() && static_cast<Eigen::Index>(header.size()) != m.cols())
        throw ConfigError("write_csv: header width does not match the matrix");
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    if (!header.empty()) out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
        out << '\n';
    }
    close_checked(out, path);
}

void write_csv(const fs::path& path, const std::vector<double>& column, const std::string& header) {
    write_csv(path, Eigen::Map<const Matrix>(column.data(), static_cast<Eigen::Index>(column.size()), 1), {header});
}

Matrix read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::vector<double> row;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!parse_row(line, row)) {
            if (line_no == 1) continue;
            if (line.empty()) continue;
            throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": not numeric");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": ragged row");
        rows.push_back(row);
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    return m;
}

void write_json(const fs::path& path, const json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    close_checked(out, path);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("expected a matrix (array of rows)");
    Matrix m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)]);
        if (row.size() != m.cols()) throw ConfigError("ragged matrix in JSON");
        m.row(r) = row.transpose();
    }
    return m;
}

}  // namespace gpmcmc::app
