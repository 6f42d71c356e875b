#pragma once

#include "gpmcmc/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gpmcmc::app {

namespace fs = std::filesystem;

/// Shortest text that parses back to exactly the same double.
std::string format_double(double x);

/// Comma-separated rows with an optional header line. Numbers are written with
/// format_double so a read-back is bit-identical.
void write_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header = {});
void write_csv(const fs::path& path, const std::vector<double>& column, const std::string& header);

/// Reads a numeric CSV; a first line that does not parse as numbers is treated as a header.
Matrix read_csv(const fs::path& path);

void write_json(const fs::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const fs::path& path);

void ensure_dir(const fs::path& dir);

nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace gpmcmc::app
