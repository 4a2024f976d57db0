#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace dualkd::harness {

// Flat "dotted.key = value" text. '#' starts a comment line; blank lines are
// skipped. Keys are unique and sorted on output.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_kv(std::string_view text, const std::string& origin = "<text>");
KeyValues read_kv_file(const std::filesystem::path& path);
std::string format_kv(const KeyValues& kv);
void write_kv_file(const std::filesystem::path& path, const KeyValues& kv);

// Value codecs shared by every config section. Parsers throw UsageError with
// the offending key in the message.
std::string format_double(double v);  // %.17g, round-trips exactly
double parse_double(const std::string& key, const std::string& text);
std::uint64_t parse_u64(const std::string& key, const std::string& text);
bool parse_bool(const std::string& key, const std::string& text);

}  // namespace dualkd::harness
