#include "ck/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ck/error.hpp"

namespace ck {

std::string fmt_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == x) break;
  }
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    std::string_view tok = pos == std::string_view::npos
                               ? line.substr(start)
                               : line.substr(start, pos - start);
    // trim surrounding whitespace and a trailing CR
    std::size_t b = tok.find_first_not_of(" \t\r");
    std::size_t e = tok.find_last_not_of(" \t\r");
    out.emplace_back(b == std::string_view::npos ? std::string_view{} : tok.substr(b, e - b + 1));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view tok, std::string_view context) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ConfigError("expected a number for " + std::string(context) + ", got '" +
                      std::string(tok) + "'");
  }
  return v;
}

long parse_long(std::string_view tok, std::string_view context) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ConfigError("expected an integer for " + std::string(context) + ", got '" +
                      std::string(tok) + "'");
  }
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace ck
