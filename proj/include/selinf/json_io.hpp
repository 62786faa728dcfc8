#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "selinf/data.hpp"
#include "selinf/inference.hpp"

namespace selinf {

using Json = nlohmann::json;

/// Infinite endpoints serialize as the strings "-inf"/"+inf".
Json json_number(double v);

/// {A: row-major, b, meta} record for --dump-event and debugging.
Json polytope_to_json(const Polytope& poly);

Json event_to_json(const SelectionEvent& event);

/// Result schema shared by the CLI subcommands:
/// {method, lambda, active:[{index,name,coef,p_value,ci:[lo,hi]}],
///  gof:{j_star,p_value}, conditioning:{n_constraints,v_minus,v_plus}}.
struct ActiveEntry {
  int index = 0;  // 1-based in the emitted JSON
  std::string name;
  double coef = 0.0;
  double p_value = -1.0;  // < 0 means absent
  double ci_lower = -kInf;
  double ci_upper = kInf;
  bool has_ci = false;
};

Json result_json(const std::string& method, double lambda,
                 const std::vector<ActiveEntry>& active,
                 const Json& gof = Json(),
                 const Json& conditioning = Json());

Json conditioning_json(int n_constraints, double v_minus, double v_plus);

}  // namespace selinf
