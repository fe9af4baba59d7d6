#pragma once

#include <random>
#include <vector>

#include "mwsl/model.hpp"
#include "mwsl/roadnet.hpp"

namespace mwsl::route {

// Simple path in the link graph: consecutive edges adjacent, no edge repeats.
struct Route {
  std::vector<int> edges;
  double length_m = 0.0;
  double log_prob = 0.0;  // ln p(e_0) + sum ln p(e_i | e_{i-1}), p(e_0) = 1

  // Junction intersections strictly between consecutive edges.
  std::vector<int> interior_nodes(const roadnet::RoadNetwork& net) const;
};

struct CandidateSet {
  int origin = -1;
  int dest = -1;
  std::vector<Route> routes;  // descending log_prob; ties by length then edges
  bool empty() const { return routes.empty(); }
};

// Chain log-probability of a route under A. Throws std::invalid_argument
// naming the pair index when consecutive edges are not adjacent.
double route_log_prob(const roadnet::RoadNetwork& net, const model::TransitionModel& A,
                      const std::vector<int>& edges);

// Length in meters of the minimum-length simple route (both endpoint edges
// included). Throws std::runtime_error when dest is unreachable.
double shortest_length(const roadnet::RoadNetwork& net, int origin, int dest);

// The minimum-length route itself (log_prob left at 0). Same reachability
// contract as shortest_length.
Route shortest_path(const roadnet::RoadNetwork& net, int origin, int dest);

// Depth-first search with admissible pruning: partial paths are cut once
// their length reaches shortest + delta_lens_m or their running probability
// falls to delta_probs or below. Keeps the m most probable complete routes.
// An over-pruned search returns an empty CandidateSet, never throws for it.
CandidateSet enumerate_candidates(const roadnet::RoadNetwork& net,
                                  const model::TransitionModel& A, int origin, int dest,
                                  double delta_lens_m, double delta_probs, int m);

// Sum of mu_e over route edges plus mu_v over interior intersections.
double route_mean_time(const roadnet::RoadNetwork& net, const model::GaussianField& field,
                       const std::vector<int>& edges);

// epsilon-greedy pick: with probability 1-epsilon the candidate minimizing
// |T - route_mean_time| (ties resolved by candidate order), otherwise a
// uniformly random candidate.
const Route& select_route(const CandidateSet& candidates, double T,
                          const model::GaussianField& field,
                          const roadnet::RoadNetwork& net, double epsilon, std::mt19937_64& rng);

}  // namespace mwsl::route
