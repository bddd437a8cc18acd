#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fluxcav::io {

inline constexpr const char* kToolVersion = "fluxcav 0.1.0";
inline constexpr int kOutputSchemaVersion = 1;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Written as "# key: value" lines ahead of CSV tables and as "metadata" in JSON.
struct Metadata {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> extra;

    nlohmann::json to_json() const;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// Doubles are printed with 17 significant digits; non-finite values as nan/inf.
void write_csv(const std::string& path, const Metadata& meta, const Table& table);

// Adds schema_version and metadata; non-finite numbers become null.
void write_json(const std::string& path, const Metadata& meta, nlohmann::json body);

// Table as {"columns": [...], "rows": [[...], ...]}.
nlohmann::json table_to_json(const Table& table);

struct CsvInput {
    std::map<std::string, std::string> header;  // "# key: value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool has(const std::string& name) const;
    // Throws SchemaError naming the column when it is missing.
    std::vector<double> column(const std::string& name) const;
};

// Comment lines start with '#'. The first non-comment line holds column names.
CsvInput read_csv(const std::string& path);

struct PlotSeries {
    std::string name;
    std::vector<double> y;
};

// Minimal SVG line plot; non-finite samples break the polyline.
void write_svg_plot(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::vector<double>& x, const std::vector<PlotSeries>& series);

} // namespace fluxcav::io
