#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace loglens::csv {

/// Reads one RFC 4180 record (quoted fields may span lines). Returns nullopt at end of input.
std::optional<std::vector<std::string>> read_row(std::istream& in);
void write_row(std::ostream& out, const std::vector<std::string>& fields);
std::string escape(const std::string& field);

}  // namespace loglens::csv
