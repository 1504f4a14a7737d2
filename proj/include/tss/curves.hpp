#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tss {

/// Numeric columns of a trace CSV keyed by header name.
struct TraceTable {
    std::vector<std::string> columns;
    std::map<std::string, std::vector<double>> values;

    const std::vector<double>& column(const std::string& name) const;
    std::size_t rows() const;
};

/// Reads a trace CSV; throws SchemaError when a trace column is missing or
/// a row is malformed.
TraceTable read_trace_csv(const std::filesystem::path& path);

/// Two stacked panels: loss components and lambda_u against iteration.
std::string render_curves_svg(const TraceTable& trace);
void export_curves(const std::filesystem::path& trace_csv, const std::filesystem::path& out_svg);

}  // namespace tss
