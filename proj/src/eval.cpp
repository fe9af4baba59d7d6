#include "mwsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mwsl::eval {

TTEMetrics tte_metrics(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.empty() || pred.size() != truth.size())
    throw std::invalid_argument("tte_metrics: need equal-length non-empty inputs, got " +
                                std::to_string(pred.size()) + " and " +
                                std::to_string(truth.size()));
  double se = 0.0, ae = 0.0, ape = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!(truth[i] > 0.0))
      throw std::invalid_argument("tte_metrics: truth entry " + std::to_string(i) +
                                  " is not positive");
    const double d = pred[i] - truth[i];
    se += d * d;
    ae += std::abs(d);
    ape += std::abs(d) / truth[i];
  }
  const double n = static_cast<double>(pred.size());
  return {std::sqrt(se / n), ae / n, ape / n};
}

double route_accuracy(const roadnet::RoadNetwork& net, const std::vector<int>& route_a,
                      const std::vector<int>& route_b) {
  std::set<int> a(route_a.begin(), route_a.end());
  std::set<int> b(route_b.begin(), route_b.end());
  double len_a = 0.0, len_b = 0.0, len_both = 0.0;
  for (int e : a) len_a += net.segments[e].length_m;
  for (int e : b) {
    len_b += net.segments[e].length_m;
    if (a.count(e)) len_both += net.segments[e].length_m;
  }
  const double denom = std::max(len_a, len_b);
  return denom > 0.0 ? len_both / denom : 0.0;
}

const char* to_string(RoadState s) {
  switch (s) {
    case RoadState::very_congested:
      return "very_congested";
    case RoadState::congested:
      return "congested";
    case RoadState::slow:
      return "slow";
    case RoadState::unblocked:
      return "unblocked";
  }
  return "unblocked";
}

std::vector<RoadState> condition_map(const roadnet::RoadNetwork& net,
                                     const model::GaussianField& field) {
  std::vector<RoadState> out(net.num_segments());
  for (const auto& s : net.segments) {
    const double speed_kph = 3.6 * s.length_m / field.mu_e[s.id];
    const double q = s.speed_kph / 4.0;
    if (speed_kph < q)
      out[s.id] = RoadState::very_congested;
    else if (speed_kph < 2.0 * q)
      out[s.id] = RoadState::congested;
    else if (speed_kph < 3.0 * q)
      out[s.id] = RoadState::slow;
    else
      out[s.id] = RoadState::unblocked;
  }
  return out;
}

double condition_agreement(const std::vector<RoadState>& pred,
                           const std::vector<RoadState>& truth) {
  if (pred.empty() || pred.size() != truth.size())
    throw std::invalid_argument("condition_agreement: need equal-length non-empty maps");
  size_t same = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(pred.size());
}

namespace {
std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

std::string report_to_json(const EvalReport& r) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"rmse\": " << fmt6(r.rmse) << ",\n";
  out << "  \"mae\": " << fmt6(r.mae) << ",\n";
  out << "  \"mape\": " << fmt6(r.mape) << ",\n";
  out << "  \"route_accuracy\": " << fmt6(r.route_accuracy) << ",\n";
  out << "  \"field_mape_frequent\": " << fmt6(r.field_mape_frequent) << ",\n";
  out << "  \"n_validation\": " << r.n_validation << ",\n";
  out << "  \"n_fallback\": " << r.n_fallback << ",\n";
  out << "  \"condition_agreement_per_slot\": {";
  bool first = true;
  for (const auto& [slot, agree] : r.condition_agreement_per_slot) {
    if (!first) out << ", ";
    first = false;
    out << "\"" << slot << "\": " << fmt6(agree);
  }
  out << "}\n}\n";
  return out.str();
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  out << "validation records : " << r.n_validation << " (" << r.n_fallback
      << " via shortest-route fallback)\n";
  out << "rmse               : " << fmt6(r.rmse) << " s\n";
  out << "mae                : " << fmt6(r.mae) << " s\n";
  out << "mape               : " << fmt6(r.mape * 100.0) << " %\n";
  out << "route accuracy     : " << fmt6(r.route_accuracy * 100.0) << " %\n";
  out << "field mape (>=20x) : " << fmt6(r.field_mape_frequent * 100.0) << " %\n";
  for (const auto& [slot, agree] : r.condition_agreement_per_slot)
    out << "condition agreement slot " << slot << " : " << fmt6(agree * 100.0) << " %\n";
  return out.str();
}

}  // namespace mwsl::eval
