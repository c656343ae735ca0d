#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ppsynth {

struct DataColumn {
  std::string name;
  std::vector<double> values;  // non-empty
  bool is_int = false;         // every value is integral when set
};

// named columns in a fixed order; the order drives data-block generation
struct Dataset {
  std::string name;
  std::string description;
  std::vector<DataColumn> columns;

  const DataColumn* find(const std::string& col) const {
    for (const auto& c : columns) {
      if (c.name == col) return &c;
    }
    return nullptr;
  }
};

const std::vector<std::string>& builtin_dataset_names();
std::optional<Dataset> builtin_dataset(const std::string& name);

}  // namespace ppsynth
