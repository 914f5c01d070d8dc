#include "openscr/covariates.hpp"

#include <fmt/format.h>

#include "openscr/common.hpp"

namespace openscr {

void CovariateTable::set_numeric(const std::string& name, std::vector<double> values) {
  if (values.size() != rows_) {
    throw ValidationError(fmt::format("covariate '{}' has {} values for {} rows", name, values.size(), rows_));
  }
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError(fmt::format("covariate '{}' has non-finite values", name));
  columns_[name] = std::move(values);
}

void CovariateTable::set_factor(const std::string& name, Factor factor) {
  if (factor.codes.size() != rows_) {
    throw ValidationError(fmt::format("covariate '{}' has {} values for {} rows", name, factor.codes.size(), rows_));
  }
  for (int c : factor.codes) {
    if (c < 0 || c >= static_cast<int>(factor.levels.size())) {
      throw ValidationError(fmt::format("covariate '{}' has an invalid level code", name));
    }
  }
  columns_[name] = std::move(factor);
}

bool CovariateTable::is_factor(const std::string& name) const {
  auto it = columns_.find(name);
  return it != columns_.end() && std::holds_alternative<Factor>(it->second);
}

const std::vector<double>& CovariateTable::numeric(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end() || !std::holds_alternative<std::vector<double>>(it->second)) {
    throw ValidationError(fmt::format("no numeric covariate '{}'", name));
  }
  return std::get<std::vector<double>>(it->second);
}

const Factor& CovariateTable::factor(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end() || !std::holds_alternative<Factor>(it->second)) {
    throw ValidationError(fmt::format("no categorical covariate '{}'", name));
  }
  return std::get<Factor>(it->second);
}

std::vector<std::string> CovariateTable::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : columns_) out.push_back(k);
  return out;
}

}  // namespace openscr
