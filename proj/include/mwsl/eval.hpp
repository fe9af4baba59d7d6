#pragma once

#include <map>
#include <string>
#include <vector>

#include "mwsl/model.hpp"
#include "mwsl/roadnet.hpp"

namespace mwsl::eval {

struct TTEMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;
};

// Standard error formulas; throws on empty or mismatched inputs and on
// non-positive truth entries (named by position).
TTEMetrics tte_metrics(const std::vector<double>& pred, const std::vector<double>& truth);

// Length-weighted overlap: meters of edges present in both routes divided by
// the longer route's meters. Symmetric, in [0, 1].
double route_accuracy(const roadnet::RoadNetwork& net, const std::vector<int>& route_a,
                      const std::vector<int>& route_b);

enum class RoadState { very_congested, congested, slow, unblocked };
const char* to_string(RoadState s);

// Per-edge congestion state from the implied speed (length / mu_e) against
// the edge's speed-limit quartiles; intervals are lower-inclusive.
std::vector<RoadState> condition_map(const roadnet::RoadNetwork& net,
                                     const model::GaussianField& field);

double condition_agreement(const std::vector<RoadState>& pred,
                           const std::vector<RoadState>& truth);

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;
  double route_accuracy = 0.0;
  double field_mape_frequent = 0.0;  // over edges traversed >= 20 times
  std::map<int, double> condition_agreement_per_slot;
  int n_validation = 0;
  int n_fallback = 0;  // validation records inferred via the shortest-route fallback
};

std::string report_to_json(const EvalReport& r);
std::string report_to_text(const EvalReport& r);

}  // namespace mwsl::eval
