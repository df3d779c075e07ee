#pragma once

#include <string>

#include "snnconv/graph.hpp"

namespace snnconv {

// Model container: a UTF-8 manifest (ordered layer list, key=value attrs)
// plus an SNNF weight blob. Saves are canonical, so equal graphs produce
// byte-identical files and save -> load -> save round-trips exactly.

inline constexpr uint32_t kModelFormatVersion = 1;

void save_model(const NetworkGraph& g, const std::string& manifest_path,
                const std::string& blob_path);

NetworkGraph load_model(const std::string& manifest_path, const std::string& blob_path);

}  // namespace snnconv
