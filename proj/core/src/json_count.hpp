#pragma once

#include <cstdint>

#include <json.hpp>

namespace coalesce::detail {

// Parsed documents store nonnegative integers as unsigned; literals built in code are signed.
inline bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace coalesce::detail
