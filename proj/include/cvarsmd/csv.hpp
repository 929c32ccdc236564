#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvarsmd {

/// Round-trippable decimal form ("%.17g", '.' separator).
std::string format_double(double value);

/// RFC 4180 field quoting: fields with a comma, quote, CR or LF are quoted
/// and embedded quotes doubled.
std::string csv_field(std::string_view text);

/// Writes rows terminated by '\n'.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void row(std::span<const std::string> fields);
    void row(std::initializer_list<std::string> fields) { row(std::span<const std::string>(fields.begin(), fields.size())); }

private:
    std::ostream& out_;
};

/// Splits one CSV record (no embedded newlines) honouring RFC 4180 quotes.
/// Throws Config on an unterminated quote.
std::vector<std::string> split_csv_record(std::string_view line);

} // namespace cvarsmd
