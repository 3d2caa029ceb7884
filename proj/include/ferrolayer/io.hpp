#pragma once

#include "ferrolayer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ferrolayer {

/// Fixed-format number text so that identical runs give identical bytes.
inline std::string format_real(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

/// RFC 4180 quoting: fields with comma, quote or line break are quoted, quotes doubled.
inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string r = "\"";
    for (char c : s) {
        if (c == '"') r += '"';
        r += c;
    }
    return r + "\"";
}

using CsvCell = std::variant<double, long long, std::string>;

inline std::string cell_text(const CsvCell& c)
{
    if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return csv_quote(std::get<std::string>(c));
}

/// Metadata for the first line of every CSV: `# ferrolayer key=value ...`. `created` is the
/// only non-deterministic field and is always written last.
struct CsvMeta {
    std::vector<std::pair<std::string, std::string>> fields;

    std::string line(bool with_timestamp = true) const
    {
        std::string s = "# ferrolayer";
        for (const auto& [k, v] : fields) s += " " + k + "=" + v;
        if (with_timestamp) {
            const std::time_t now = std::time(nullptr);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
            s += std::string(" created=") + buf;
        }
        return s;
    }
};

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add(std::vector<CsvCell> row)
    {
        if (row.size() != columns_.size()) throw ValidationError("csv row has the wrong number of cells");
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }

    /// Column names and rows, without the metadata line.
    std::string body() const
    {
        std::ostringstream o;
        for (std::size_t i = 0; i < columns_.size(); ++i) o << (i ? "," : "") << csv_quote(columns_[i]);
        o << "\n";
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << cell_text(r[i]);
            o << "\n";
        }
        return o.str();
    }

    void write(const std::filesystem::path& path, const CsvMeta& meta) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot write " + path.string());
        out << meta.line() << "\n" << body();
        if (!out) throw ValidationError("write failed: " + path.string());
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<CsvCell>> rows_;
};

/// Reads the metadata value `key` from the first line of a CSV file written by CsvTable.
inline std::string csv_meta_value(const std::filesystem::path& path, const std::string& key)
{
    std::ifstream in(path);
    std::string line;
    if (!in || !std::getline(in, line) || line.rfind("# ferrolayer", 0) != 0) return {};
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
    return {};
}

/// The file without its first (metadata) line.
inline std::string csv_body_of(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::string first;
    std::getline(in, first);
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

inline std::string xml_escape(const std::string& s)
{
    std::string o;
    for (char ch : s) {
        switch (ch) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += ch;
        }
    }
    return o;
}

/// Log-log plot of (x, y) points with a fitted line y = C x^slope, as SVG 1.1.
inline std::string loglog_svg(const std::vector<double>& x, const std::vector<double>& y, double slope,
                              const std::string& title)
{
    const double W = 480, H = 360, L = 60, R = 20, T = 40, B = 50;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log10(x[i]));
        ly.push_back(std::log10(y[i]));
    }
    double x0 = *std::min_element(lx.begin(), lx.end()), x1 = *std::max_element(lx.begin(), lx.end());
    double y0 = *std::min_element(ly.begin(), ly.end()), y1 = *std::max_element(ly.begin(), ly.end());
    if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
    const double px = 0.05 * (x1 - x0), py = 0.1 * (y1 - y0);
    x0 -= px, x1 += px, y0 -= py, y1 += py;
    auto sx = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };

    // least-squares intercept for the given slope
    double c = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) c += ly[i] - slope * lx[i];
    c /= static_cast<double>(lx.size());

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">log10 epsilon</text>\n"
      << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << H / 2 << ")\">log10 error</text>\n";
    o << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < lx.size(); ++i) o << (i ? " " : "") << num(sx(lx[i])) << "," << num(sy(ly[i]));
    o << "\"/>\n";
    for (std::size_t i = 0; i < lx.size(); ++i)
        o << "<circle cx=\"" << num(sx(lx[i])) << "\" cy=\"" << num(sy(ly[i])) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    o << "<line x1=\"" << num(sx(x0)) << "\" y1=\"" << num(sy(c + slope * x0)) << "\" x2=\"" << num(sx(x1)) << "\" y2=\""
      << num(sy(c + slope * x1)) << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">slope "
      << num(slope) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

} // namespace ferrolayer
