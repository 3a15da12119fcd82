#include "flowpilot/data_dir.hpp"

#include <cstdlib>

namespace flowpilot {

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("FLOWPILOT_DATA_DIR"); env && *env) return env;
  std::error_code ec;
  if (std::filesystem::exists(std::filesystem::path(FLOWPILOT_INSTALL_DATA_DIR) / "parameters.json", ec))
    return FLOWPILOT_INSTALL_DATA_DIR;
  return FLOWPILOT_SOURCE_DATA_DIR;
}

}  // namespace flowpilot
