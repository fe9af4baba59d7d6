#include "mwsl/routesearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace mwsl::route {

using roadnet::RoadNetwork;

std::vector<int> Route::interior_nodes(const RoadNetwork& net) const {
  std::vector<int> nodes;
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    nodes.push_back(net.segments[edges[i]].to_node);
  return nodes;
}

double route_log_prob(const RoadNetwork& net, const model::TransitionModel& A,
                      const std::vector<int>& edges) {
  double total = 0.0;
  for (size_t i = 1; i < edges.size(); ++i) {
    const int p = net.pair_index(edges[i - 1], edges[i]);
    if (p < 0)
      throw std::invalid_argument("route edges " + std::to_string(edges[i - 1]) + " -> " +
                                  std::to_string(edges[i]) + " at position " + std::to_string(i) +
                                  " are not adjacent");
    total += A.log_prob[p];
  }
  return total;
}

double shortest_length(const RoadNetwork& net, int origin, int dest) {
  const int n = net.num_segments();
  if (origin < 0 || origin >= n || dest < 0 || dest >= n)
    throw std::invalid_argument("shortest_length: segment id out of range");
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[origin] = net.segments[origin].length_m;
  heap.emplace(dist[origin], origin);
  while (!heap.empty()) {
    auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    if (i == dest) return d;
    for (int j : net.out_links[i]) {
      const double nd = d + net.segments[j].length_m;
      if (nd < dist[j]) {
        dist[j] = nd;
        heap.emplace(nd, j);
      }
    }
  }
  if (!std::isfinite(dist[dest]))
    throw std::runtime_error("no route from segment " + std::to_string(origin) + " to segment " +
                             std::to_string(dest));
  return dist[dest];
}

Route shortest_path(const RoadNetwork& net, int origin, int dest) {
  const int n = net.num_segments();
  if (origin < 0 || origin >= n || dest < 0 || dest >= n)
    throw std::invalid_argument("shortest_path: segment id out of range");
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[origin] = net.segments[origin].length_m;
  heap.emplace(dist[origin], origin);
  while (!heap.empty()) {
    auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    if (i == dest) break;
    for (int j : net.out_links[i]) {
      const double nd = d + net.segments[j].length_m;
      if (nd < dist[j]) {
        dist[j] = nd;
        prev[j] = i;
        heap.emplace(nd, j);
      }
    }
  }
  if (!std::isfinite(dist[dest]))
    throw std::runtime_error("no route from segment " + std::to_string(origin) + " to segment " +
                             std::to_string(dest));
  Route r;
  for (int at = dest; at != -1; at = prev[at]) r.edges.push_back(at);
  std::reverse(r.edges.begin(), r.edges.end());
  r.length_m = dist[dest];
  return r;
}

namespace {

struct DfsState {
  const RoadNetwork* net;
  const model::TransitionModel* A;
  int dest;
  double length_bound;
  double log_prob_floor;  // -inf when delta_probs == 0
  std::vector<char> visited;
  std::vector<int> path;
  double length = 0.0;
  double log_prob = 0.0;
  std::vector<Route> found;
};

void dfs(DfsState& s, int current) {
  if (current == s.dest) {
    s.found.push_back({s.path, s.length, s.log_prob});
    return;
  }
  for (int j : s.net->out_links[current]) {
    if (s.visited[j]) continue;
    const double next_length = s.length + s.net->segments[j].length_m;
    if (next_length >= s.length_bound) continue;
    const int p = s.net->pair_index(current, j);
    const double next_log_prob = s.log_prob + s.A->log_prob[p];
    if (next_log_prob <= s.log_prob_floor) continue;

    s.visited[j] = 1;
    s.path.push_back(j);
    const double saved_length = s.length;
    const double saved_log_prob = s.log_prob;
    s.length = next_length;
    s.log_prob = next_log_prob;
    dfs(s, j);
    s.length = saved_length;
    s.log_prob = saved_log_prob;
    s.path.pop_back();
    s.visited[j] = 0;
  }
}

bool candidate_order(const Route& a, const Route& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.length_m != b.length_m) return a.length_m < b.length_m;
  return a.edges < b.edges;
}

}  // namespace

CandidateSet enumerate_candidates(const RoadNetwork& net, const model::TransitionModel& A,
                                  int origin, int dest, double delta_lens_m, double delta_probs,
                                  int m) {
  if (origin == dest)
    throw std::invalid_argument("enumerate_candidates: origin and destination segments must differ");
  if (delta_lens_m < 0.0) throw std::invalid_argument("enumerate_candidates: delta_lens < 0");
  if (delta_probs < 0.0 || delta_probs >= 1.0)
    throw std::invalid_argument("enumerate_candidates: delta_probs outside [0, 1)");
  if (m < 1) throw std::invalid_argument("enumerate_candidates: m < 1");

  CandidateSet out;
  out.origin = origin;
  out.dest = dest;

  DfsState s;
  s.net = &net;
  s.A = &A;
  s.dest = dest;
  s.length_bound = shortest_length(net, origin, dest) + delta_lens_m;
  s.log_prob_floor =
      delta_probs > 0.0 ? std::log(delta_probs) : -std::numeric_limits<double>::infinity();
  s.visited.assign(net.num_segments(), 0);
  s.visited[origin] = 1;
  s.path.push_back(origin);
  s.length = net.segments[origin].length_m;
  s.log_prob = 0.0;
  if (s.length < s.length_bound) dfs(s, origin);

  std::sort(s.found.begin(), s.found.end(), candidate_order);
  if (static_cast<int>(s.found.size()) > m) s.found.resize(m);
  out.routes = std::move(s.found);
  return out;
}

double route_mean_time(const RoadNetwork& net, const model::GaussianField& field,
                       const std::vector<int>& edges) {
  double total = 0.0;
  for (int e : edges) total += field.mu_e[e];
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    total += field.mu_v[net.segments[edges[i]].to_node];
  return total;
}

const Route& select_route(const CandidateSet& candidates, double T,
                          const model::GaussianField& field, const RoadNetwork& net,
                          double epsilon, std::mt19937_64& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_route: empty candidate set");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("select_route: epsilon outside [0, 1]");

  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
      std::uniform_int_distribution<size_t> pick(0, candidates.routes.size() - 1);
      return candidates.routes[pick(rng)];
    }
  }
  size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < candidates.routes.size(); ++i) {
    const double err = std::abs(T - route_mean_time(net, field, candidates.routes[i].edges));
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return candidates.routes[best];
}

}  // namespace mwsl::route
