#ifndef CK_IO_HPP
#define CK_IO_HPP

#include <string>
#include <string_view>
#include <vector>

namespace ck {

// Shortest decimal string that parses back to exactly the same double.
std::string fmt_double(double x);

std::vector<std::string> split_csv_line(std::string_view line);

// Strict, locale-independent double parsing; throws ConfigError with context.
double parse_double(std::string_view tok, std::string_view context);
long parse_long(std::string_view tok, std::string_view context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace ck

#endif
