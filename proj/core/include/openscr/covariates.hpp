#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace openscr {

/// Categorical covariate: level names plus a per-row level code.
struct Factor {
  std::vector<std::string> levels;
  std::vector<int> codes;
};

/// Named covariate columns over a fixed set of evaluation units
/// (mesh points, trap x primary cells, intervals).
class CovariateTable {
 public:
  CovariateTable() = default;
  explicit CovariateTable(std::size_t rows) : rows_(rows) {}

  std::size_t rows() const { return rows_; }

  void set_numeric(const std::string& name, std::vector<double> values);
  void set_factor(const std::string& name, Factor factor);

  bool has(const std::string& name) const { return columns_.contains(name); }
  bool is_factor(const std::string& name) const;
  const std::vector<double>& numeric(const std::string& name) const;
  const Factor& factor(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::size_t rows_ = 0;
  std::map<std::string, std::variant<std::vector<double>, Factor>> columns_;
};

}  // namespace openscr
