#pragma once

namespace treestat {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace treestat
