#include "ck/params.hpp"

#include "ck/error.hpp"

namespace ck {

int ParameterVector::add(std::string name, double value, bool fixed) {
  if (index_of(name) >= 0) throw ConfigError("duplicate parameter name '" + name + "'");
  const int i = n();
  names_.push_back(std::move(name));
  values_.push_back(value);
  fixed_.push_back(fixed ? 1 : 0);
  if (!fixed) free_.push_back(i);
  return i;
}

int ParameterVector::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

double ParameterVector::get(std::string_view name) const {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return values_[i];
}

void ParameterVector::set(std::string_view name, double v) {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  values_[i] = v;
}

std::vector<double> ParameterVector::free_values() const {
  std::vector<double> out(free_.size());
  for (std::size_t k = 0; k < free_.size(); ++k) out[k] = values_[free_[k]];
  return out;
}

void ParameterVector::set_free_values(std::span<const double> v) {
  for (std::size_t k = 0; k < free_.size(); ++k) values_[free_[k]] = v[k];
}

}  // namespace ck
