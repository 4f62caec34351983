#ifndef CK_ERROR_HPP
#define CK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ck {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: malformed files, inconsistent schemas, invalid requests.
// The CLI maps these to exit code 2.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Numerical failures: non-finite objectives, all-draw underflow.
// The CLI maps these to exit code 3.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace ck

#endif
