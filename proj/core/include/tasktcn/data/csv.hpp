#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tasktcn/data/park_record.hpp"

namespace tasktcn::data {

/// Accepts "YYYY-MM-DDTHH:MM[:SS]" with 'T' or ' ' as separator and an
/// optional "Z" or "+00:00" suffix. Throws ParseError (line 0) otherwise.
std::int64_t parse_iso8601(std::string_view text);
/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(std::int64_t timestamp);

/// Reads one park file: a header, a timestamp column, feature columns and the
/// power column. Rows with an empty or NaN field are dropped; rows are sorted
/// by time. Malformed rows raise ParseError with the 1-based line number,
/// power outside [0, 1] raises ValidationError.
ParkRecord load_park_csv(const std::filesystem::path& path, const DatasetSpec& spec,
                         std::string park_id = {});

/// Writes a record in the format load_park_csv reads (shortest round-trip floats).
void write_park_csv(const std::filesystem::path& path, const ParkRecord& record,
                    const DatasetSpec& spec);

}  // namespace tasktcn::data
