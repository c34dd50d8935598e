#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dtnarrate::csv {

// Splits one RFC 4180 record. Quoted fields may contain commas and "".
std::vector<std::string> split_line(std::string_view line);

// Quotes the field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

}  // namespace dtnarrate::csv
