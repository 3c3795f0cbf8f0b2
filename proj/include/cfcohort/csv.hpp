#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cfcohort::csv {

using Record = std::vector<std::string>;

/// RFC 4180 style: comma separated, double-quote quoting with "" escapes,
/// LF or CRLF line ends. A trailing line break does not produce an empty record.
std::vector<Record> parse(std::string_view text);

std::string escape(std::string_view field);

}  // namespace cfcohort::csv
