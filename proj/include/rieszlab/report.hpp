#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "rieszlab/graph.hpp"

namespace rieszlab {

using json = nlohmann::ordered_json;

constexpr int kReportSchemaVersion = 1;

/// Report payloads are deterministic given (graph, seed, parameter grid);
/// volatile fields (wall clock) live outside the payload.
struct Report {
    json payload;
    double wall_ms = 0.0;

    Report(const std::string& id, const std::string& graph_desc) {
        payload["schema_version"] = kReportSchemaVersion;
        payload["experiment"] = id;
        payload["graph"] = graph_desc;
        payload["params"] = json::object();
        payload["tables"] = json::object();
        payload["fits"] = json::object();
        payload["verdicts"] = json::array();
    }

    void add_verdict(const std::string& name, bool pass, const std::string& detail) {
        payload["verdicts"].push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    }

    void add_table(const std::string& name, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows) {
        json t;
        t["columns"] = columns;
        t["rows"] = rows;
        payload["tables"][name] = std::move(t);
    }

    bool all_pass() const {
        for (const auto& v : payload["verdicts"])
            if (!v["pass"].get<bool>()) return false;
        return true;
    }

    json to_json() const {
        json out = payload;
        out["wall_ms"] = wall_ms;
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open report file: " + path);
        os << to_json().dump(2) << "\n";
    }

    /// Writes every embedded table as name.csv under the given prefix.
    void save_tables_csv(const std::string& prefix) const {
        for (auto it = payload["tables"].begin(); it != payload["tables"].end(); ++it) {
            std::ofstream os(prefix + it.key() + ".csv");
            if (!os) throw std::runtime_error("cannot open csv for table " + it.key());
            const auto& t = it.value();
            bool first = true;
            for (const auto& c : t["columns"]) {
                if (!first) os << ",";
                os << c.get<std::string>();
                first = false;
            }
            os << "\n";
            for (const auto& row : t["rows"]) {
                first = true;
                for (const auto& v : row) {
                    if (!first) os << ",";
                    os << format_double(v.get<double>());
                    first = false;
                }
                os << "\n";
            }
        }
    }
};

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// Least-squares line fit of y against x with slope standard error and
/// residual standard error.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double residual_se = 0.0;
    int points = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    LineFit fit;
    fit.points = static_cast<int>(xs.size());
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_line: need at least two points");
    double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissa grid");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
        ss += r * r;
    }
    if (xs.size() > 2) {
        double mse = ss / (n - 2.0);
        fit.residual_se = std::sqrt(mse);
        fit.slope_stderr = std::sqrt(mse * n / denom);
    }
    return fit;
}

/// Minimal SVG log-log scatter/line plot for report tables.
inline void write_loglog_svg(const std::string& path, const std::string& title,
                             const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("write_loglog_svg: bad series");
    const double W = 640, H = 480, pad = 60;
    double lx0 = std::log10(*std::min_element(xs.begin(), xs.end()));
    double lx1 = std::log10(*std::max_element(xs.begin(), xs.end()));
    double ly0 = std::log10(*std::min_element(ys.begin(), ys.end()));
    double ly1 = std::log10(*std::max_element(ys.begin(), ys.end()));
    if (lx1 == lx0) lx1 = lx0 + 1;
    if (ly1 == ly0) ly1 = ly0 + 1;
    auto X = [&](double x) { return pad + (std::log10(x) - lx0) / (lx1 - lx0) * (W - 2 * pad); };
    auto Y = [&](double y) {
        return H - pad - (std::log10(y) - ly0) / (ly1 - ly0) * (H - 2 * pad);
    };
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open svg file: " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
       << "</text>\n";
    os << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
    for (size_t i = 0; i < xs.size(); ++i) os << X(xs[i]) << "," << Y(ys[i]) << " ";
    os << "'/>\n";
    for (size_t i = 0; i < xs.size(); ++i)
        os << "<circle cx='" << X(xs[i]) << "' cy='" << Y(ys[i]) << "' r='3' fill='crimson'/>\n";
    os << "<line x1='" << pad << "' y1='" << H - pad << "' x2='" << W - pad << "' y2='" << H - pad
       << "' stroke='black'/>\n";
    os << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='" << H - pad
       << "' stroke='black'/>\n";
    os << "</svg>\n";
}

}  // namespace rieszlab
