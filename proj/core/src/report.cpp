#include "snnconv/report.hpp"

#include <cstdio>
#include <fstream>

#include "snnconv/errors.hpp"

namespace snnconv {

std::string format_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) return "";
    std::vector<size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out;
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out.append(widths[c] - row[c].size() + 2, ' ');
        }
        out += "\n";
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw_data(path + ": cannot open for writing");
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) f << ",";
            f << row[c];
        }
        f << "\n";
    }
    if (!f) throw_data(path + ": write failed");
}

}  // namespace snnconv
