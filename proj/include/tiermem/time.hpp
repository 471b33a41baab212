#pragma once

#include "tiermem/result.hpp"

#include <chrono>
#include <string>
#include <string_view>

namespace tiermem {

// UTC instant at millisecond precision.
using Instant = std::chrono::sys_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

// "2023-10-11T09:30:00.000Z"
std::string format_iso8601(Instant t);

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" with optional ".mmm" and
// optional trailing "Z".
Result<Instant> parse_iso8601(std::string_view text);

Instant now_utc();

}  // namespace tiermem
