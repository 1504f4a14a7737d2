#include "tss/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tss/errors.hpp"

namespace tss {

namespace {

const std::vector<std::string> kRequired{"iteration", "l_sup_1", "l_sup_2", "l_unsup", "l_cog", "l_mix", "lambda_u", "l_total",
                                         "pseudo_labeler", "wall_ms"};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

std::string f(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Panel {
    double x0, y0, width, height;
};

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, double xmin, double xmax, double ymin, double ymax,
                     const Panel& p, const std::string& colour, const std::string& series) {
    std::ostringstream os;
    os << "<polyline data-series=\"" << series << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    const double xr = xmax > xmin ? xmax - xmin : 1.0;
    const double yr = ymax > ymin ? ymax - ymin : 1.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double px = p.x0 + (xs[i] - xmin) / xr * p.width;
        const double py = p.y0 + p.height - (ys[i] - ymin) / yr * p.height;
        os << f(px) << "," << f(py) << (i + 1 < xs.size() ? " " : "");
    }
    os << "\"/>\n";
    return os.str();
}

}  // namespace

const std::vector<double>& TraceTable::column(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw SchemaError("trace has no column '" + name + "'");
    return it->second;
}

std::size_t TraceTable::rows() const { return values.empty() ? 0 : values.begin()->second.size(); }

TraceTable read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace: " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw SchemaError(path.string() + ": empty trace");
    TraceTable t;
    t.columns = split_csv(header);
    for (const auto& req : kRequired)
        if (std::find(t.columns.begin(), t.columns.end(), req) == t.columns.end())
            throw SchemaError(path.string() + ": missing column '" + req + "'");
    for (const auto& c : t.columns) t.values[c];
    int lineno = 1;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != t.columns.size()) throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": wrong cell count");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                t.values[t.columns[i]].push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + cells[i] + "'");
            }
        }
    }
    return t;
}

std::string render_curves_svg(const TraceTable& trace) {
    const auto& it = trace.column("iteration");
    if (it.empty()) throw SchemaError("trace has no rows");
    const double xmin = it.front(), xmax = it.back();
    const Panel top{60, 30, 620, 220};
    const Panel bottom{60, 320, 620, 150};

    const std::vector<std::pair<std::string, std::string>> losses{
        {"l_total", "#000000"}, {"l_sup_1", "#1f77b4"}, {"l_sup_2", "#ff7f0e"}, {"l_unsup", "#2ca02c"}, {"l_cog", "#d62728"}, {"l_mix", "#9467bd"}};
    double lo = 0.0, hi = 0.0;
    for (const auto& [name, _] : losses)
        for (double v : trace.column(name))
            if (std::isfinite(v)) hi = std::max(hi, v), lo = std::min(lo, v);
    const auto& lam = trace.column("lambda_u");
    double lam_hi = 0.0;
    for (double v : lam) lam_hi = std::max(lam_hi, v);

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"520\" viewBox=\"0 0 720 520\">\n"
       << "<rect width=\"720\" height=\"520\" fill=\"white\"/>\n"
       << "<text x=\"60\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">losses (max " << g(hi) << ")</text>\n"
       << "<text x=\"60\" y=\"310\" font-family=\"sans-serif\" font-size=\"13\">lambda_u (" << g(lam.front()) << " .. " << g(lam.back())
       << ")</text>\n";
    for (const Panel& p : {top, bottom})
        os << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.width << "\" height=\"" << p.height
           << "\" fill=\"none\" stroke=\"#888888\"/>\n";
    double legend_y = top.y0 + 14;
    for (const auto& [name, colour] : losses) {
        os << polyline(it, trace.column(name), xmin, xmax, lo, hi, top, colour, name);
        os << "<text x=\"" << top.x0 + top.width - 70 << "\" y=\"" << legend_y << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
           << colour << "\">" << name << "</text>\n";
        legend_y += 13;
    }
    os << polyline(it, lam, xmin, xmax, 0.0, lam_hi, bottom, "#17becf", "lambda_u");
    os << "<text x=\"60\" y=\"500\" font-family=\"sans-serif\" font-size=\"11\">iteration " << g(xmin) << " .. " << g(xmax) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

void export_curves(const std::filesystem::path& trace_csv, const std::filesystem::path& out_svg) {
    const std::string svg = render_curves_svg(read_trace_csv(trace_csv));
    std::ofstream out(out_svg);
    if (!out) throw IoError("cannot open for writing: " + out_svg.string());
    out << svg;
}

}  // namespace tss
