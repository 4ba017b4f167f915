#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace mandi {

/// Calendar date with day resolution.
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD`. Returns nullopt on any malformed or out-of-range input.
std::optional<Date> try_parse_date(std::string_view text);

/// Like try_parse_date but throws std::invalid_argument.
Date parse_date(std::string_view text);

std::string format_date(Date d);

inline Date add_days(Date d, long days) { return d + std::chrono::days{days}; }

inline long days_between(Date from, Date to) { return (to - from).count(); }

}  // namespace mandi
