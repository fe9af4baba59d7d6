#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwsl/model.hpp"
#include "mwsl/roadnet.hpp"
#include "mwsl/routesearch.hpp"

// Built-in oracle suites behind the `verify` subcommand. The enumeration
// oracle here deliberately shares no code with routesearch: it lists every
// simple path outright and filters afterwards.
namespace mwsl::verify {

// Small valid network (<= max_edges directed segments) built from a random
// spanning tree plus extra two-way streets.
roadnet::RoadNetwork random_mini_network(std::uint64_t seed, int max_edges = 12);

// The 8-edge gradient fixture: one-way diamond pair with two out-degree-2
// decisions, so candidate sets hold 2 routes and every loss term carries
// gradient. Segment 0 is the origin, segment 7 the destination.
roadnet::RoadNetwork branching_fixture();

// Row-stochastic transition model from random logits.
model::TransitionModel random_transition(const roadnet::RoadNetwork& net, std::uint64_t seed);

// Exhaustive simple-path enumeration, filtered by the same thresholds and
// sorted by the same ordering rule as enumerate_candidates.
route::CandidateSet brute_force_candidates(const roadnet::RoadNetwork& net,
                                           const model::TransitionModel& A, int origin, int dest,
                                           double delta_lens_m, double delta_probs, int m);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Individual suites, reused by the acceptance harness.
CheckResult check_gradient_ops();
CheckResult check_gradient_model(int entries);
CheckResult check_route_enumeration(int graphs);
CheckResult check_stochastic_rows(int seeds);
CheckResult check_kl_properties(int sweeps);
CheckResult check_aggregation_monte_carlo();

// Runs the oracle suites; `full` adds the Monte Carlo aggregation check and
// widens sweep sizes. Gradient fault injection, when enabled through
// ad::set_gradient_fault_injection, makes the gradient suite fail by design.
std::vector<CheckResult> run_suites(bool full);

}  // namespace mwsl::verify
