#include "selinf/json_io.hpp"

#include <cmath>

namespace selinf {

Json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

Json polytope_to_json(const Polytope& poly) {
  Json j;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(poly.A.size()));
  for (Eigen::Index r = 0; r < poly.A.rows(); ++r)
    for (Eigen::Index c = 0; c < poly.A.cols(); ++c)
      flat.push_back(poly.A(r, c));
  j["A"] = flat;
  j["rows"] = poly.rows();
  j["cols"] = poly.dim();
  j["b"] = std::vector<double>(poly.b.data(), poly.b.data() + poly.b.size());
  Json meta;
  meta["method"] = poly.meta.method;
  Json active = Json::array();
  for (int a : poly.meta.active) active.push_back(a + 1);
  meta["active"] = active;
  meta["signs"] = poly.meta.signs;
  if (poly.meta.lambda > 0) meta["lambda"] = poly.meta.lambda;
  if (poly.meta.gamma > 0) meta["gamma"] = poly.meta.gamma;
  if (!poly.meta.step_order.empty()) {
    Json order = Json::array();
    for (int s : poly.meta.step_order) order.push_back(s + 1);
    meta["step_order"] = order;
  }
  if (!poly.meta.note.empty()) meta["note"] = poly.meta.note;
  j["meta"] = meta;
  return j;
}

Json event_to_json(const SelectionEvent& event) {
  if (event.is_single()) return polytope_to_json(event.poly());
  if (event.is_union()) {
    Json j;
    j["union"] = Json::array();
    for (const auto& p : event.members()) j["union"].push_back(polytope_to_json(p));
    return j;
  }
  Json j;
  j["blackbox"] = event.selector().description;
  return j;
}

Json result_json(const std::string& method, double lambda,
                 const std::vector<ActiveEntry>& active, const Json& gof,
                 const Json& conditioning) {
  Json j;
  j["method"] = method;
  if (lambda > 0) j["lambda"] = lambda;
  Json arr = Json::array();
  for (const auto& e : active) {
    Json a;
    a["index"] = e.index;
    if (!e.name.empty()) a["name"] = e.name;
    a["coef"] = e.coef;
    if (e.p_value >= 0) a["p_value"] = e.p_value;
    if (e.has_ci)
      a["ci"] = Json::array({json_number(e.ci_lower), json_number(e.ci_upper)});
    arr.push_back(a);
  }
  j["active"] = arr;
  if (!gof.is_null()) j["gof"] = gof;
  if (!conditioning.is_null()) j["conditioning"] = conditioning;
  return j;
}

Json conditioning_json(int n_constraints, double v_minus, double v_plus) {
  Json c;
  c["n_constraints"] = n_constraints;
  c["v_minus"] = json_number(v_minus);
  c["v_plus"] = json_number(v_plus);
  return c;
}

}  // namespace selinf
