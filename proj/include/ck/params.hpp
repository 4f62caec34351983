#ifndef CK_PARAMS_HPP
#define CK_PARAMS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ck {

// Named parameter storage. Entries are either free (estimated) or fixed
// (normalizations). The free subset maps to the optimizer's vector in
// declaration order.
class ParameterVector {
public:
  int add(std::string name, double value, bool fixed = false);

  int index_of(std::string_view name) const;  // -1 if absent
  bool has(std::string_view name) const { return index_of(name) >= 0; }

  double value(int i) const { return values_[i]; }
  void set_value(int i, double v) { values_[i] = v; }
  double get(std::string_view name) const;
  void set(std::string_view name, double v);

  bool fixed(int i) const { return fixed_[i] != 0; }
  const std::string& name(int i) const { return names_[i]; }

  int n() const { return static_cast<int>(names_.size()); }
  int n_free() const { return static_cast<int>(free_.size()); }
  const std::vector<int>& free_indices() const { return free_; }

  std::vector<double> free_values() const;
  void set_free_values(std::span<const double> v);

  const std::vector<double>& values() const { return values_; }

private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<std::uint8_t> fixed_;
  std::vector<int> free_;
};

}  // namespace ck

#endif
