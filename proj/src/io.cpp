#include "fluxcav/io.hpp"

#include "fluxcav/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace fluxcav::io {

using nlohmann::json;

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < length; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFound("cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

json Metadata::to_json() const
{
    json j = {{"tool_version", kToolVersion}, {"command", command}, {"config_sha256", config_hash}, {"seed", seed}};
    for (const auto& [k, v] : extra) {
        j[k] = v;
    }
    return j;
}

namespace {

std::ofstream open_output(const std::string& path)
{
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ResourceError("cannot write " + path);
    }
    return out;
}

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

json sanitize(json j)
{
    if (j.is_number_float() && !std::isfinite(j.get<double>())) {
        return nullptr;
    }
    if (j.is_array() || j.is_object()) {
        for (auto& item : j) {
            item = sanitize(item);
        }
    }
    return j;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, const std::string& path, std::size_t line, const std::string& column)
{
    const std::string t = trim(cell);
    if (t == "nan") {
        return std::nan("");
    }
    if (t == "inf" || t == "-inf") {
        return t[0] == '-' ? -INFINITY : INFINITY;
    }
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw SchemaError(path + ":" + std::to_string(line) + ": column '" + column + "' has non-numeric value '"
                          + t + "'");
    }
    return v;
}

} // namespace

void write_csv(const std::string& path, const Metadata& meta, const Table& table)
{
    auto out = open_output(path);
    out << "# tool_version: " << kToolVersion << "\n";
    out << "# command: " << meta.command << "\n";
    out << "# config_sha256: " << meta.config_hash << "\n";
    out << "# seed: " << meta.seed << "\n";
    for (const auto& [k, v] : meta.extra) {
        out << "# " << k << ": " << v << "\n";
    }
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out << (i ? "," : "") << table.columns[i];
    }
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_number(row[i]);
        }
        out << "\n";
    }
    if (!out) {
        throw ResourceError("write failed for " + path);
    }
}

json table_to_json(const Table& table)
{
    return {{"columns", table.columns}, {"rows", table.rows}};
}

void write_json(const std::string& path, const Metadata& meta, json body)
{
    body["schema_version"] = kOutputSchemaVersion;
    body["metadata"] = meta.to_json();
    auto out = open_output(path);
    out << sanitize(std::move(body)).dump(2) << "\n";
    if (!out) {
        throw ResourceError("write failed for " + path);
    }
}

bool CsvInput::has(const std::string& name) const
{
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> CsvInput::column(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw SchemaError("missing required column '" + name + "'");
    }
    const auto idx = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(r[idx]);
    }
    return out;
}

CsvInput read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw NotFound("cannot read " + path);
    }
    CsvInput table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        if (t[0] == '#') {
            const auto colon = t.find(':');
            if (colon != std::string::npos) {
                table.header[trim(t.substr(1, colon - 1))] = trim(t.substr(colon + 1));
            }
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(t);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(trim(cell));
        }
        if (table.columns.empty()) {
            table.columns = cells;
            continue;
        }
        if (cells.size() != table.columns.size()) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.columns.size())
                              + " columns, found " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            row.push_back(parse_cell(cells[i], path, line_no, table.columns[i]));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.columns.empty()) {
        throw SchemaError(path + ": no header row");
    }
    return table;
}

void write_svg_plot(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::vector<double>& x, const std::vector<PlotSeries>& series)
{
    constexpr double width = 720.0;
    constexpr double height = 440.0;
    constexpr double margin = 60.0;
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (const auto& s : series) {
            if (i < s.y.size() && std::isfinite(s.y[i]) && std::isfinite(x[i])) {
                x_lo = std::min(x_lo, x[i]);
                x_hi = std::max(x_hi, x[i]);
                y_lo = std::min(y_lo, s.y[i]);
                y_hi = std::max(y_hi, s.y[i]);
            }
        }
    }
    if (!(x_hi > x_lo)) {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    if (!(y_hi > y_lo)) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    auto px = [&](double v) { return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
    auto py = [&](double v) { return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    auto out = open_output(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin << "\" height=\""
        << height - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
        << x_label << "</text>\n";
    out << "<text x=\"" << margin << "\" y=\"" << height - margin + 16 << "\" font-size=\"10\">" << format_number(x_lo)
        << "</text>\n";
    out << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 16
        << "\" text-anchor=\"end\" font-size=\"10\">" << format_number(x_hi) << "</text>\n";
    out << "<text x=\"" << margin - 4 << "\" y=\"" << height - margin << "\" text-anchor=\"end\" font-size=\"10\">"
        << format_number(y_lo) << "</text>\n";
    out << "<text x=\"" << margin - 4 << "\" y=\"" << margin + 8 << "\" text-anchor=\"end\" font-size=\"10\">"
        << format_number(y_hi) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = palette[k % std::size(palette)];
        std::ostringstream pts;
        auto flush = [&]() {
            if (!pts.str().empty()) {
                out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
                    << "\"/>\n";
                pts.str("");
            }
        };
        for (std::size_t i = 0; i < x.size() && i < series[k].y.size(); ++i) {
            if (std::isfinite(series[k].y[i]) && std::isfinite(x[i])) {
                pts << px(x[i]) << "," << py(series[k].y[i]) << " ";
            } else {
                flush();
            }
        }
        flush();
        out << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14 * (k + 1) << "\" font-size=\"10\" fill=\""
            << color << "\">" << series[k].name << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace fluxcav::io
