#pragma once

#include <filesystem>

namespace flowpilot {

/// Directory holding parameters.json, ppa_model.json, corpus/ and schema/.
/// Resolution order: $FLOWPILOT_DATA_DIR, the installed share directory,
/// then the source tree.
std::filesystem::path data_dir();

}  // namespace flowpilot
