#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "mwsl/routesearch.hpp"
#include "mwsl/simulator.hpp"
#include "mwsl/verify.hpp"

using namespace mwsl;
using namespace mwsl::route;

namespace {

model::TransitionModel uniform_transition(const roadnet::RoadNetwork& net) {
  model::TransitionModel A;
  A.prob.resize(net.num_pairs());
  A.log_prob.resize(net.num_pairs());
  for (int i = 0; i < net.num_segments(); ++i) {
    const int deg = net.pair_offset[i + 1] - net.pair_offset[i];
    for (int p = net.pair_offset[i]; p < net.pair_offset[i + 1]; ++p) {
      A.prob[p] = 1.0 / deg;
      A.log_prob[p] = std::log(A.prob[p]);
    }
  }
  return A;
}

// star-chain: origin edge 0 -> junction with 2 choices -> junction with 2
// choices -> dest. Built so two consecutive decisions have out-degree 2.
roadnet::RoadNetwork fork_network() {
  // nodes: 0 -> 1 -> {2a=2, 2b=3} -> 4 -> {5a=5, 5b=6} -> 7, plus a sink from
  // each branch so branches merge at 4 and 7.
  roadnet::RoadNetwork net;
  auto node = [&](int id, double lat, double lon) {
    net.intersections.push_back({id, lat, lon, roadnet::NodeTag::none, 0});
  };
  node(0, 34.000, 108.000);
  node(1, 34.001, 108.000);
  node(2, 34.002, 108.0005);
  node(3, 34.002, 107.9995);
  node(4, 34.003, 108.000);
  node(5, 34.004, 108.0005);
  node(6, 34.004, 107.9995);
  node(7, 34.005, 108.000);
  node(8, 34.006, 108.000);
  int next_id = 0;
  auto seg = [&](int u, int v, double len) {
    roadnet::RoadSegment s;
    s.id = next_id++;
    s.from_node = u;
    s.to_node = v;
    s.road_type = roadnet::RoadType::secondary;
    s.length_m = len;
    s.lanes = 1;
    s.one_way = true;
    s.speed_kph = 40.0;
    net.segments.push_back(s);
  };
  seg(0, 1, 100);  // 0
  seg(1, 2, 110);  // 1 upper branch
  seg(1, 3, 120);  // 2 lower branch
  seg(2, 4, 110);  // 3
  seg(3, 4, 120);  // 4
  seg(4, 5, 130);  // 5 upper branch
  seg(4, 6, 140);  // 6 lower branch
  seg(5, 7, 130);  // 7
  seg(6, 7, 140);  // 8
  seg(7, 8, 100);  // 9 tail so both second branches reach a common edge
  std::map<int, std::set<std::pair<int, int>>> streets;
  for (const auto& s : net.segments) {
    auto key = std::minmax(s.from_node, s.to_node);
    streets[s.from_node].insert(key);
    streets[s.to_node].insert(key);
  }
  for (auto& n : net.intersections) n.street_count = static_cast<int>(streets[n.id].size());
  roadnet::validate_and_build(net);
  return net;
}

}  // namespace

TEST_CASE("route_log_prob: single edge is zero, uniform forks multiply") {
  // chain 0->1->2->3 with one-way spurs off nodes 1 and 2, so the two
  // decisions along {0, 1, 2} are both out-degree-2 rows
  roadnet::RoadNetwork net;
  auto node = [&](int id, double lat, double lon, int sc) {
    net.intersections.push_back({id, lat, lon, roadnet::NodeTag::none, sc});
  };
  node(0, 34.000, 108.000, 1);
  node(1, 34.001, 108.000, 3);
  node(2, 34.002, 108.000, 3);
  node(3, 34.003, 108.000, 1);
  node(4, 34.001, 108.001, 1);
  node(5, 34.002, 108.001, 1);
  int next_id = 0;
  auto seg = [&](int u, int v) {
    roadnet::RoadSegment s;
    s.id = next_id++;
    s.from_node = u;
    s.to_node = v;
    s.road_type = roadnet::RoadType::tertiary;
    s.length_m = 100.0;
    s.lanes = 1;
    s.one_way = true;
    s.speed_kph = 30.0;
    net.segments.push_back(s);
  };
  seg(0, 1);  // 0
  seg(1, 2);  // 1
  seg(2, 3);  // 2
  seg(1, 4);  // 3 spur
  seg(2, 5);  // 4 spur
  roadnet::validate_and_build(net);
  auto A = uniform_transition(net);

  CHECK(route_log_prob(net, A, {0}) == 0.0);
  const double lp = route_log_prob(net, A, {0, 1, 2});
  CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(route_log_prob(net, A, {0, 2}), doctest::Contains("not adjacent"),
                       std::invalid_argument);
}

TEST_CASE("exp(log_prob) lies in (0, 1] on random graphs") {
  for (int g = 0; g < 5; ++g) {
    auto net = verify::random_mini_network(500 + g);
    auto A = verify::random_transition(net, 600 + g);
    route::CandidateSet cands;
    try {
      cands = enumerate_candidates(net, A, 0, net.num_segments() - 1, 1e18, 0.0, 64);
    } catch (const std::runtime_error&) {
      continue;  // unreachable pair in this random graph
    }
    for (const auto& r : cands.routes) {
      const double p = std::exp(r.log_prob);
      CHECK(p > 0.0);
      CHECK(p <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("shortest_length: two-edge path with no alternative") {
  auto net = fork_network();
  // 5 -> 7: only route is {5, 7}
  CHECK(shortest_length(net, 5, 7) == doctest::Approx(130.0 + 130.0));
  auto sp = shortest_path(net, 5, 7);
  CHECK(sp.edges == std::vector<int>{5, 7});
  CHECK(sp.length_m == doctest::Approx(260.0));
}

TEST_CASE("shortest_length on a ring takes the cheaper way around") {
  auto net = fork_network();
  // 0 to 7: upper-upper = 100+110+110+130+130 = 580
  CHECK(shortest_length(net, 0, 8) ==
        doctest::Approx(100 + 110 + 110 + 140 + 140));  // forced lower at the second fork
  CHECK(shortest_length(net, 0, 7) == doctest::Approx(580.0));
}

TEST_CASE("shortest_length satisfies the loose triangle inequality") {
  auto net = sim::generate_city(4, 4, 77);
  std::mt19937_64 rng(78);
  int done = 0;
  while (done < 30) {
    const int a = static_cast<int>(rng() % net.num_segments());
    const int b = static_cast<int>(rng() % net.num_segments());
    const int c = static_cast<int>(rng() % net.num_segments());
    if (a == b || b == c || a == c) continue;
    try {
      const double ac = shortest_length(net, a, c);
      const double ab = shortest_length(net, a, b);
      const double bc = shortest_length(net, b, c);
      CHECK(ac <= ab + bc + net.segments[b].length_m + 1e-9);
      ++done;
    } catch (const std::runtime_error&) {
      continue;
    }
  }
}

TEST_CASE("unreachable destination raises") {
  auto net = fork_network();
  CHECK_THROWS_AS(shortest_length(net, 7, 0), std::runtime_error);  // one-way, no way back
}

TEST_CASE("enumerate matches exhaustive enumeration with pruning disabled") {
  for (int g = 0; g < 6; ++g) {
    auto net = verify::random_mini_network(900 + g);
    auto A = verify::random_transition(net, 950 + g);
    std::mt19937_64 rng(51 + g);
    for (int t = 0; t < 4; ++t) {
      const int o = static_cast<int>(rng() % net.num_segments());
      const int d = static_cast<int>(rng() % net.num_segments());
      if (o == d) continue;
      try {
        shortest_length(net, o, d);
      } catch (const std::runtime_error&) {
        continue;
      }
      auto fast = enumerate_candidates(net, A, o, d, 1e18, 0.0, 1 << 20);
      auto slow = verify::brute_force_candidates(net, A, o, d, 1e18, 0.0, 1 << 20);
      REQUIRE(fast.routes.size() == slow.routes.size());
      for (size_t i = 0; i < fast.routes.size(); ++i) {
        CHECK(fast.routes[i].edges == slow.routes[i].edges);
        CHECK(fast.routes[i].log_prob == doctest::Approx(slow.routes[i].log_prob));
      }
    }
  }
}

TEST_CASE("m = 1 with uniform transitions returns the dominant route") {
  auto net = fork_network();
  auto A = uniform_transition(net);
  // all routes 0..7 have identical probability (two forks each); the shortest
  // must win the tie
  auto got = enumerate_candidates(net, A, 0, 7, 1e18, 0.0, 1);
  REQUIRE(got.routes.size() == 1);
  CHECK(got.routes.front().edges == std::vector<int>{0, 1, 3, 5, 7});
}

TEST_CASE("origin equal to destination is rejected") {
  auto net = fork_network();
  auto A = uniform_transition(net);
  CHECK_THROWS_AS(enumerate_candidates(net, A, 2, 2, 100.0, 0.0, 4), std::invalid_argument);
}

TEST_CASE("over-aggressive thresholds yield an empty set, not a crash") {
  auto net = fork_network();
  auto A = uniform_transition(net);
  auto got = enumerate_candidates(net, A, 0, 7, 1e18, 0.9, 4);  // every route has p = 0.25
  CHECK(got.empty());
  CHECK(got.routes.empty());
}

TEST_CASE("tightening thresholds never adds a route") {
  for (int g = 0; g < 5; ++g) {
    auto net = verify::random_mini_network(700 + g);
    auto A = verify::random_transition(net, 750 + g);
    std::mt19937_64 rng(61 + g);
    const int o = static_cast<int>(rng() % net.num_segments());
    int d = static_cast<int>(rng() % net.num_segments());
    if (o == d) d = (d + 1) % net.num_segments();
    try {
      shortest_length(net, o, d);
    } catch (const std::runtime_error&) {
      continue;
    }
    auto loose = enumerate_candidates(net, A, o, d, 5000.0, 0.0, 1 << 20);
    auto tighter_prob = enumerate_candidates(net, A, o, d, 5000.0, 0.05, 1 << 20);
    auto tighter_len = enumerate_candidates(net, A, o, d, 500.0, 0.0, 1 << 20);
    auto in_loose = [&](const Route& r) {
      for (const auto& c : loose.routes)
        if (c.edges == r.edges) return true;
      return false;
    };
    for (const auto& r : tighter_prob.routes) CHECK(in_loose(r));
    for (const auto& r : tighter_len.routes) CHECK(in_loose(r));
    CHECK(tighter_prob.routes.size() <= loose.routes.size());
    CHECK(tighter_len.routes.size() <= loose.routes.size());
  }
}

TEST_CASE("route_mean_time sums edges plus interior nodes") {
  auto net = fork_network();
  model::GaussianField field;
  field.mu_e = Eigen::VectorXd::LinSpaced(net.num_segments(), 10.0, 18.0);
  field.sigma_e = Eigen::VectorXd::Ones(net.num_segments());
  field.mu_v = Eigen::VectorXd::LinSpaced(net.num_intersections(), 1.0, 8.0);
  field.sigma_v = Eigen::VectorXd::Ones(net.num_intersections());

  CHECK(route_mean_time(net, field, {3}) == doctest::Approx(field.mu_e[3]));
  const std::vector<int> r{0, 1, 3};
  const double expect = field.mu_e[0] + field.mu_e[1] + field.mu_e[3] +
                        field.mu_v[net.segments[0].to_node] + field.mu_v[net.segments[1].to_node];
  CHECK(route_mean_time(net, field, r) == doctest::Approx(expect));

  field.mu_v.setZero();
  CHECK(route_mean_time(net, field, r) ==
        doctest::Approx(field.mu_e[0] + field.mu_e[1] + field.mu_e[3]));
}

TEST_CASE("route_mean_time is additive over concatenation at a shared edge") {
  auto net = fork_network();
  model::GaussianField field;
  field.mu_e = Eigen::VectorXd::LinSpaced(net.num_segments(), 5.0, 30.0);
  field.mu_v = Eigen::VectorXd::LinSpaced(net.num_intersections(), 0.5, 4.0);
  // R1 = {0,1,3}, R2 = {3,5,7}; concatenation shares edge 3
  const double r1 = route_mean_time(net, field, {0, 1, 3});
  const double r2 = route_mean_time(net, field, {3, 5, 7});
  const double cat = route_mean_time(net, field, {0, 1, 3, 5, 7});
  CHECK(cat == doctest::Approx(r1 + r2 - field.mu_e[3]).epsilon(1e-12));
}

TEST_CASE("select_route: greedy pick, determinism and scale invariance") {
  auto net = fork_network();
  auto A = uniform_transition(net);
  auto cands = enumerate_candidates(net, A, 0, 9, 1e18, 0.0, 4);
  REQUIRE(cands.routes.size() == 4);
  model::GaussianField field;
  field.mu_e.resize(net.num_segments());
  for (int i = 0; i < net.num_segments(); ++i) field.mu_e[i] = 10.0 + i * i;  // tie-free sums
  field.mu_v = Eigen::VectorXd::Constant(net.num_intersections(), 2.0);

  std::mt19937_64 rng(70);
  const double target = route_mean_time(net, field, cands.routes[2].edges);
  const Route& picked = select_route(cands, target, field, net, 0.0, rng);
  CHECK(picked.edges == cands.routes[2].edges);
  // deterministic at epsilon = 0
  std::mt19937_64 rng2(999);
  CHECK(select_route(cands, target, field, net, 0.0, rng2).edges == picked.edges);

  // scaling T and mu together preserves the argmin
  model::GaussianField scaled = field;
  scaled.mu_e *= 3.7;
  scaled.mu_v *= 3.7;
  CHECK(select_route(cands, target * 3.7, scaled, net, 0.0, rng).edges == picked.edges);
}

TEST_CASE("select_route: epsilon = 1 is uniform over the candidate set") {
  auto net = fork_network();
  auto A = uniform_transition(net);
  auto cands = enumerate_candidates(net, A, 0, 9, 1e18, 0.0, 4);
  REQUIRE(cands.routes.size() == 4);
  model::GaussianField field;
  field.mu_e = Eigen::VectorXd::Constant(net.num_segments(), 10.0);
  field.mu_v = Eigen::VectorXd::Zero(net.num_intersections());

  std::mt19937_64 rng(71);
  std::map<std::vector<int>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[select_route(cands, 100.0, field, net, 1.0, rng).edges]++;
  const double expect = n / 4.0;
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (const auto& [edges, count] : counts) CHECK(std::abs(count - expect) <= 3.0 * sigma);
  CHECK(counts.size() == 4);
}
