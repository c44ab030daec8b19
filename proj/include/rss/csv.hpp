#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rss::csv {

/// Reads one record (RFC 4180 quoting, CRLF tolerant). Returns false at EOF.
bool read_row(std::istream& in, std::vector<std::string>& fields, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote, or a newline.
std::string escape(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace rss::csv
