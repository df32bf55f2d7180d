#pragma once

#include <string>
#include <vector>

#include "cascadesim/trace.hpp"

namespace cascadesim::testing {

inline TraceSet make_trace(const std::vector<TraceRecord>& rows) {
  TraceSet t;
  t.records = rows;
  for (std::size_t i = 0; i < t.records.size(); ++i) t.records[i].sample_index = i;
  return t;
}

inline std::string preset(const std::string& name) {
  return std::string(CASCADESIM_PRESET_DIR) + "/" + name;
}

}  // namespace cascadesim::testing
