#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace riskbn {

/// Sorted keys, two-space indent, floating-point numbers at 6 significant
/// digits. Reports rendered this way diff cleanly and compare byte for byte.
std::string canonical_dump(const nlohmann::json& j);

/// 6-significant-digit rendering used for every float in a report.
std::string format_number(double v);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace riskbn
