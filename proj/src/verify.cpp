#include "mwsl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "mwsl/simulator.hpp"
#include "mwsl/training.hpp"

namespace mwsl::verify {

using roadnet::RoadNetwork;

RoadNetwork random_mini_network(std::uint64_t seed, int max_edges) {
  std::mt19937_64 rng(sim::splitmix64(seed ^ 0x3a11ull));
  const int max_streets = max_edges / 2;
  std::uniform_int_distribution<int> npick(3, 5);
  int n = std::min(npick(rng), max_streets + 1);

  std::set<std::pair<int, int>> streets;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> upick(0, v - 1);
    streets.insert(std::minmax(upick(rng), v));
  }
  std::uniform_int_distribution<int> extra_pick(0, n - 1);
  int budget = max_streets - static_cast<int>(streets.size());
  for (int tries = 0; tries < 20 && budget > 0; ++tries) {
    int a = extra_pick(rng), b = extra_pick(rng);
    if (a == b) continue;
    if (streets.insert(std::minmax(a, b)).second) --budget;
  }

  RoadNetwork net;
  std::uniform_real_distribution<double> coord(-0.01, 0.01);
  for (int v = 0; v < n; ++v) {
    roadnet::Intersection node;
    node.id = v;
    node.lat = 34.0 + coord(rng);
    node.lon = 108.0 + coord(rng);
    node.tag = static_cast<roadnet::NodeTag>(rng() % roadnet::kNumNodeTags);
    net.intersections.push_back(node);
  }
  std::uniform_real_distribution<double> len(120.0, 900.0);
  for (const auto& [a, b] : streets) {
    const auto type = static_cast<roadnet::RoadType>(rng() % roadnet::kNumRoadTypes);
    const double length = len(rng);
    for (int dir = 0; dir < 2; ++dir) {
      roadnet::RoadSegment s;
      s.id = static_cast<int>(net.segments.size());
      s.from_node = dir == 0 ? a : b;
      s.to_node = dir == 0 ? b : a;
      s.road_type = type;
      s.length_m = length;
      s.lanes = 1 + static_cast<int>(rng() % 3);
      s.one_way = false;
      s.speed_kph = 30.0 + 10.0 * static_cast<double>(rng() % 4);
      net.segments.push_back(s);
    }
  }
  for (auto& node : net.intersections) {
    int count = 0;
    for (const auto& [a, b] : streets)
      if (a == node.id || b == node.id) ++count;
    node.street_count = count;
  }
  roadnet::validate_and_build(net);
  return net;
}

RoadNetwork branching_fixture() {
  RoadNetwork net;
  auto node = [&](int id, double lat, double lon, int sc) {
    net.intersections.push_back({id, lat, lon, roadnet::NodeTag::crossing, sc});
  };
  node(0, 34.000, 108.0000, 1);
  node(1, 34.001, 108.0000, 3);
  node(2, 34.002, 108.0005, 2);
  node(3, 34.002, 107.9995, 2);
  node(4, 34.003, 108.0000, 4);
  node(5, 34.004, 108.0005, 2);
  node(6, 34.004, 107.9995, 1);
  node(7, 34.005, 108.0005, 1);
  int next_id = 0;
  auto seg = [&](int u, int v, double len) {
    roadnet::RoadSegment s;
    s.id = next_id++;
    s.from_node = u;
    s.to_node = v;
    s.road_type = next_id % 2 ? roadnet::RoadType::secondary : roadnet::RoadType::primary;
    s.length_m = len;
    s.lanes = 1;
    s.one_way = true;
    s.speed_kph = 40.0;
    net.segments.push_back(s);
  };
  seg(0, 1, 100);  // 0: origin
  seg(1, 2, 110);  // 1: upper branch
  seg(1, 3, 120);  // 2: lower branch
  seg(2, 4, 110);  // 3
  seg(3, 4, 120);  // 4
  seg(4, 5, 130);  // 5: second decision
  seg(4, 6, 140);  // 6: dead-end branch
  seg(5, 7, 130);  // 7: destination
  roadnet::validate_and_build(net);
  return net;
}

model::TransitionModel random_transition(const RoadNetwork& net, std::uint64_t seed) {
  std::mt19937_64 rng(sim::splitmix64(seed ^ 0x7ab5ull));
  std::normal_distribution<double> gauss(0.0, 1.0);
  model::TransitionModel A;
  A.prob.resize(net.num_pairs());
  A.log_prob.resize(net.num_pairs());
  std::vector<double> logits(net.num_pairs());
  for (auto& l : logits) l = gauss(rng);
  for (int i = 0; i < net.num_segments(); ++i) {
    const int lo = net.pair_offset[i], hi = net.pair_offset[i + 1];
    if (hi == lo) continue;
    double mx = logits[lo];
    for (int p = lo; p < hi; ++p) mx = std::max(mx, logits[p]);
    double total = 0.0;
    for (int p = lo; p < hi; ++p) total += std::exp(logits[p] - mx);
    const double lse = std::log(total) + mx;
    for (int p = lo; p < hi; ++p) {
      A.log_prob[p] = logits[p] - lse;
      A.prob[p] = std::exp(A.log_prob[p]);
    }
  }
  return A;
}

namespace {

void all_simple_paths(const RoadNetwork& net, int current, int dest, std::vector<char>& used,
                      std::vector<int>& path, std::vector<std::vector<int>>& out) {
  if (current == dest) {
    out.push_back(path);
    return;
  }
  for (int j : net.out_links[current]) {
    if (used[j]) continue;
    used[j] = 1;
    path.push_back(j);
    all_simple_paths(net, j, dest, used, path, out);
    path.pop_back();
    used[j] = 0;
  }
}

}  // namespace

route::CandidateSet brute_force_candidates(const RoadNetwork& net,
                                           const model::TransitionModel& A, int origin, int dest,
                                           double delta_lens_m, double delta_probs, int m) {
  std::vector<std::vector<int>> paths;
  std::vector<char> used(net.num_segments(), 0);
  std::vector<int> path{origin};
  used[origin] = 1;
  all_simple_paths(net, origin, dest, used, path, paths);

  const double shortest = route::shortest_length(net, origin, dest);
  route::CandidateSet out;
  out.origin = origin;
  out.dest = dest;
  for (const auto& edges : paths) {
    route::Route r;
    r.edges = edges;
    for (int e : edges) r.length_m += net.segments[e].length_m;
    r.log_prob = route::route_log_prob(net, A, edges);
    if (!(r.length_m < shortest + delta_lens_m)) continue;
    if (delta_probs > 0.0 && !(std::exp(r.log_prob) > delta_probs)) continue;
    out.routes.push_back(std::move(r));
  }
  std::sort(out.routes.begin(), out.routes.end(), [](const route::Route& a, const route::Route& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    if (a.length_m != b.length_m) return a.length_m < b.length_m;
    return a.edges < b.edges;
  });
  if (static_cast<int>(out.routes.size()) > m) out.routes.resize(m);
  return out;
}

// --- suites -----------------------------------------------------------------

CheckResult check_gradient_ops() {
  CheckResult res{"gradient-ops", false, ""};
  ad::ParamStore store;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ad::Matrix x(3, 4), w(4, 3);
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) x(r, c) = gauss(rng);
  for (long r = 0; r < w.rows(); ++r)
    for (long c = 0; c < w.cols(); ++c) w(r, c) = gauss(rng);
  store.add("x", x);
  store.add("w", w);
  auto build = [](ad::ParamStore& s) {
    ad::Value h = ad::tanh(ad::matmul(s.at("x"), s.at("w")));
    ad::Value sm = ad::softmax_rows(h);
    ad::Value act = ad::add(ad::softplus(h), ad::sigmoid(sm));
    return ad::mean(ad::square(act));
  };
  auto r = ad::grad_check(store, build, 1e-5, 48, 3);
  res.passed = r.max_rel_error < 1e-5;
  std::ostringstream note;
  note << "max_rel_err=" << r.max_rel_error << " over " << r.entries_checked << " entries";
  res.detail = note.str();
  return res;
}

CheckResult check_gradient_model(int entries) {
  CheckResult res{"gradient-model-losses", false, ""};
  auto net = branching_fixture();
  model::ModelConfig mc;
  mc.slots = 4;
  auto params = model::init_params(net, mc, 7);
  const model::ModelGraph graph = model::build_model_graph(net);
  const model::Context ctx{1, 1, 0};

  auto snapshot = model::model_forward(net, graph, params, ctx);
  auto A = snapshot.transition();
  auto field = snapshot.field();
  auto candidates = route::enumerate_candidates(net, A, 0, 7, 1e9, 0.0, 4);
  if (candidates.routes.size() < 2) {
    res.detail = "fixture produced fewer than 2 candidates";
    return res;
  }
  const auto selected = candidates.routes.front();
  const double T = route::route_mean_time(net, field, selected.edges) * 1.15 + 3.0;

  auto build = [&](ad::ParamStore&) {
    auto fwd = model::model_forward(net, graph, params, ctx);
    ad::Value agg = train::loss_aggregate(net, selected.edges, T, fwd);
    ad::Value tp = train::loss_transition(net, selected.edges, fwd);
    ad::Value kl = train::loss_kl(net, candidates, T, 30.0, field, fwd);
    return ad::add(ad::add(ad::scale(agg, 0.8), ad::scale(tp, 0.1)), ad::scale(kl, 0.1));
  };
  auto r = ad::grad_check(params.store, build, 1e-5, entries, 13);
  res.passed = r.max_rel_error < 1e-4 && r.entries_checked >= entries;
  std::ostringstream note;
  note << "max_rel_err=" << r.max_rel_error << " over " << r.entries_checked << " entries ("
       << r.entries_skipped << " kink-skipped)";
  res.detail = note.str();
  return res;
}

CheckResult check_route_enumeration(int graphs) {
  CheckResult res{"route-enumeration-oracle", false, ""};
  int compared = 0;
  for (int g = 0; g < graphs; ++g) {
    auto net = random_mini_network(1000 + g);
    auto A = random_transition(net, 2000 + g);
    std::mt19937_64 rng(sim::splitmix64(3000 + g));
    for (int trial = 0; trial < 4; ++trial) {
      const int origin = static_cast<int>(rng() % net.num_segments());
      const int dest = static_cast<int>(rng() % net.num_segments());
      if (origin == dest) continue;
      try {
        route::shortest_length(net, origin, dest);
      } catch (const std::exception&) {
        continue;  // unreachable pair
      }
      auto fast = route::enumerate_candidates(net, A, origin, dest, 1e18, 0.0, 1 << 20);
      auto slow = brute_force_candidates(net, A, origin, dest, 1e18, 0.0, 1 << 20);
      if (fast.routes.size() != slow.routes.size()) {
        res.detail = "set size mismatch on graph " + std::to_string(g);
        return res;
      }
      for (size_t i = 0; i < fast.routes.size(); ++i)
        if (fast.routes[i].edges != slow.routes[i].edges) {
          res.detail = "order mismatch on graph " + std::to_string(g);
          return res;
        }
      ++compared;
    }
  }
  res.passed = compared > 0;
  res.detail = std::to_string(compared) + " OD pairs matched exhaustive enumeration";
  return res;
}

CheckResult check_stochastic_rows(int seeds) {
  CheckResult res{"transition-stochasticity", false, ""};
  auto net = sim::generate_city(3, 3, 17);
  model::ModelConfig mc;
  mc.slots = 4;
  const model::ModelGraph graph = model::build_model_graph(net);
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    auto params = model::init_params(net, mc, 100 + s);
    auto fwd = model::model_forward(net, graph, params, model::Context{s % mc.slots, s % 4, s % 2});
    auto A = fwd.transition();
    for (int i = 0; i < net.num_segments(); ++i) {
      const int lo = net.pair_offset[i], hi = net.pair_offset[i + 1];
      if (hi == lo) continue;
      double total = 0.0;
      for (int p = lo; p < hi; ++p) total += A.prob[p];
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  res.passed = worst < 1e-9;
  std::ostringstream note;
  note << "worst |row_sum - 1| = " << worst << " over " << seeds << " seeds";
  res.detail = note.str();
  return res;
}

CheckResult check_kl_properties(int sweeps) {
  CheckResult res{"kl-nonnegativity", false, ""};
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 2.0);
  double min_kl = 0.0;
  for (int i = 0; i < sweeps; ++i) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<ad::Value> scores;
    std::vector<double> targets;
    for (int k = 0; k < n; ++k) {
      scores.push_back(ad::Value::leaf(ad::Matrix::Constant(1, 1, gauss(rng))));
      targets.push_back(gauss(rng));
    }
    min_kl = std::min(min_kl, train::kl_between(scores, targets).item());
  }
  // identical distributions must give zero
  std::vector<ad::Value> same{ad::Value::scalar(0.3), ad::Value::scalar(-1.2),
                              ad::Value::scalar(0.8)};
  const double zero_case = train::kl_between(same, {0.3, -1.2, 0.8}).item();
  res.passed = min_kl >= 0.0 && std::abs(zero_case) < 1e-12;
  std::ostringstream note;
  note << "min KL = " << min_kl << ", KL(P||P) = " << zero_case << " over " << sweeps
       << " random sets";
  res.detail = note.str();
  return res;
}

CheckResult check_aggregation_monte_carlo() {
  CheckResult res{"aggregation-law", false, ""};
  auto net = sim::generate_city(4, 4, 23);
  auto oracle = sim::assign_oracle(net, 6, 29);
  auto routes = sim::k_lowest_time_routes(net, oracle.mu_e.col(2), oracle.mu_v.col(2), 0,
                                          net.num_segments() - 1, 1);
  if (routes.empty()) {
    res.detail = "no route in fixture";
    return res;
  }
  const auto& edges = routes.front();
  const int n = 100000;
  std::mt19937_64 rng(31);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = sim::draw_route_seconds(net, oracle, 2, edges, 1.0, rng);
    sum += t;
    sumsq += t * t;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  const double mu = sim::route_oracle_mean(net, oracle, 2, edges);
  const double sigma2 = sim::route_oracle_variance(net, oracle, 2, edges);
  const bool mean_ok = std::abs(mean - mu) <= 3.0 * std::sqrt(sigma2 / n);
  const bool var_ok = std::abs(var - sigma2) / sigma2 < 0.10;
  res.passed = mean_ok && var_ok;
  std::ostringstream note;
  note << "mean " << mean << " vs " << mu << ", var " << var << " vs " << sigma2;
  res.detail = note.str();
  return res;
}

std::vector<CheckResult> run_suites(bool full) {
  std::vector<CheckResult> out;
  out.push_back(check_gradient_ops());
  out.push_back(check_gradient_model(full ? 200 : 60));
  out.push_back(check_route_enumeration(full ? 20 : 8));
  out.push_back(check_stochastic_rows(full ? 100 : 20));
  out.push_back(check_kl_properties(1000));
  if (full) out.push_back(check_aggregation_monte_carlo());
  return out;
}

}  // namespace mwsl::verify
