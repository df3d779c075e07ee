#pragma once

#include <string>
#include <vector>

namespace snnconv {

// Deterministic number formatting shared by manifests and CSV reports:
// shortest representation that round-trips the value.
std::string format_float(float v);
std::string format_double(double v);

/// Renders rows as an aligned text table; the first row is the header.
std::string render_table(const std::vector<std::vector<std::string>>& rows);

/// Writes rows as CSV; the first row is the header.
void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);

}  // namespace snnconv
