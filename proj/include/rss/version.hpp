#pragma once

namespace rss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rss
