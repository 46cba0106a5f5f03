#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pocbounds/affine_form.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

using Json = nlohmann::json;

/// JSON document shape for a bound form:
/// {
///   "layout": ["P(y_x)", ...],
///   "lower_terms": [{"coeffs": [...], "offset": 0.0}, ...],
///   "upper_terms": [{"coeffs": [...], "offset": 0.0}, ...],
///   "denominator": "one" | "<layout symbol>"
/// }
inline Json form_to_json(const AffineBoundForm& form) {
  Json doc;
  doc["layout"] = form.layout().symbols();
  auto terms_to_json = [](const std::vector<AffineTerm>& terms) {
    Json arr = Json::array();
    for (const auto& t : terms) {
      Json jt;
      jt["coeffs"] = std::vector<double>(t.coeffs.data(),
                                         t.coeffs.data() + t.coeffs.size());
      jt["offset"] = t.offset;
      arr.push_back(std::move(jt));
    }
    return arr;
  };
  doc["lower_terms"] = terms_to_json(form.lower_terms());
  doc["upper_terms"] = terms_to_json(form.upper_terms());
  doc["denominator"] = form.denominator_index()
                           ? form.layout().symbol(*form.denominator_index())
                           : std::string("one");
  return doc;
}

inline AffineBoundForm form_from_json(const Json& doc,
                                      const std::string& name = "custom") {
  for (const char* field : {"layout", "lower_terms", "upper_terms",
                            "denominator"}) {
    if (!doc.contains(field)) {
      throw ValidationError(std::string("bound form document is missing "
                                        "required field '") +
                            field + "'");
    }
  }
  ThetaLayout layout(doc.at("layout").get<std::vector<std::string>>());
  auto terms_from_json = [&](const Json& arr) {
    std::vector<AffineTerm> terms;
    for (const auto& jt : arr) {
      AffineTerm t;
      auto coeffs = jt.at("coeffs").get<std::vector<double>>();
      t.coeffs = Eigen::Map<const Vector>(coeffs.data(),
                                          static_cast<Eigen::Index>(
                                              coeffs.size()));
      t.offset = jt.at("offset").get<double>();
      terms.push_back(std::move(t));
    }
    return terms;
  };
  auto lower = terms_from_json(doc.at("lower_terms"));
  auto upper = terms_from_json(doc.at("upper_terms"));
  std::optional<std::size_t> den_idx;
  std::string den = doc.at("denominator").get<std::string>();
  if (den != "one") den_idx = layout.index_of(den);
  return AffineBoundForm(std::move(layout), std::move(lower), std::move(upper),
                         den_idx, name);
}

/// One reported confidence interval, tagged with everything needed to
/// reproduce it.
struct IntervalEstimate {
  std::string endpoint;  // "lower" | "upper"
  std::string method;    // "smooth" | "numdelta"
  double point = 0.0;
  double se = 0.0;  // 0 for numdelta, where no single SE exists
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.05;
  int B = 0;              // 0 for smooth
  double epsilon_n = 0.0;  // 0 for smooth
  std::uint64_t seed = 0;
};

inline Json interval_to_json(const IntervalEstimate& est) {
  Json doc;
  doc["endpoint"] = est.endpoint;
  doc["method"] = est.method;
  doc["point"] = est.point;
  doc["se"] = est.se;
  doc["ci_low"] = est.ci_low;
  doc["ci_high"] = est.ci_high;
  doc["alpha"] = est.alpha;
  doc["B"] = est.B;
  doc["epsilon_n"] = est.epsilon_n;
  doc["seed"] = est.seed;
  return doc;
}

inline IntervalEstimate interval_from_json(const Json& doc) {
  IntervalEstimate est;
  est.endpoint = doc.at("endpoint").get<std::string>();
  est.method = doc.at("method").get<std::string>();
  est.point = doc.at("point").get<double>();
  est.se = doc.at("se").get<double>();
  est.ci_low = doc.at("ci_low").get<double>();
  est.ci_high = doc.at("ci_high").get<double>();
  est.alpha = doc.at("alpha").get<double>();
  est.B = doc.at("B").get<int>();
  est.epsilon_n = doc.at("epsilon_n").get<double>();
  est.seed = doc.at("seed").get<std::uint64_t>();
  return est;
}

}  // namespace pocbounds
