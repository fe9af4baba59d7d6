#include "mwsl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <mutex>
#include <sstream>
#include <thread>

#include "mwsl/errors.hpp"

namespace mwsl::sim {

using roadnet::NodeTag;
using roadnet::RoadNetwork;
using roadnet::RoadSegment;
using roadnet::RoadType;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

namespace {

constexpr double kEarthRadiusM = 6371000.0;

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  auto rad = [](double d) { return d * M_PI / 180.0; };
  const double dlat = rad(lat2 - lat1);
  const double dlon = rad(lon2 - lon1);
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(rad(lat1)) * std::cos(rad(lat2)) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

bool line_is_major(int index) { return index % 3 == 0; }

RoadType horizontal_type(int row) {
  if (line_is_major(row)) return row % 6 == 0 ? RoadType::trunk : RoadType::primary;
  return row % 2 == 0 ? RoadType::secondary : RoadType::tertiary;
}

RoadType vertical_type(int col) {
  if (line_is_major(col)) return col % 6 == 0 ? RoadType::primary : RoadType::trunk;
  return col % 2 == 0 ? RoadType::tertiary : RoadType::secondary;
}

double speed_for(RoadType t) {
  switch (t) {
    case RoadType::trunk:
      return 70.0;
    case RoadType::primary:
      return 60.0;
    case RoadType::secondary:
      return 40.0;
    default:
      return 30.0;
  }
}

int lanes_for(RoadType t) {
  switch (t) {
    case RoadType::trunk:
    case RoadType::primary:
      return 3;
    case RoadType::secondary:
      return 2;
    default:
      return 1;
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Two bumps at the morning and evening rush; in [0, 1).
double rush_bump(double hour) {
  auto g = [&](double center) {
    const double d = hour - center;
    return std::exp(-d * d / (2.0 * 1.8 * 1.8));
  };
  return g(8.5) + g(18.0);
}

// Arterials keep moving at rush hour (peak ~1.8x free flow, mid "slow" band);
// minor roads jam harder (peak ~3.4x, "congested" band).
double congestion_multiplier(int slot, int slots, RoadType type) {
  const double hour = (slot + 0.5) * 24.0 / slots;
  const int cls = roadnet::road_class(type);
  const double amp = (cls <= 1) ? 0.8 : 2.4;
  return std::min(4.0, 1.0 + amp * rush_bump(hour));
}

}  // namespace

RoadNetwork generate_city(int rows, int cols, std::uint64_t seed) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("generate_city: rows and cols must be >= 2");
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> jitter(-0.18, 0.18);
  std::uniform_real_distribution<double> spacing(0.6, 1.6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // irregular block sizes: street lengths vary ~2.5x across the city, which
  // also keeps per-route edge and node counts from being collinear
  const double lat0 = 34.20, lon0 = 108.90, step = 0.0045;
  std::vector<double> row_pos(rows, 0.0), col_pos(cols, 0.0);
  for (int r = 1; r < rows; ++r) row_pos[r] = row_pos[r - 1] + spacing(rng) * step;
  for (int c = 1; c < cols; ++c) col_pos[c] = col_pos[c - 1] + spacing(rng) * step;

  RoadNetwork net;
  net.intersections.reserve(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      roadnet::Intersection n;
      n.id = r * cols + c;
      n.lat = lat0 + row_pos[r] + jitter(rng) * step;
      n.lon = lon0 + col_pos[c] + jitter(rng) * step;
      net.intersections.push_back(n);
    }

  auto add_street = [&](int a, int b, RoadType type) {
    const auto& na = net.intersections[a];
    const auto& nb = net.intersections[b];
    const double len = haversine_m(na.lat, na.lon, nb.lat, nb.lon);
    for (int dir = 0; dir < 2; ++dir) {
      RoadSegment s;
      s.id = static_cast<int>(net.segments.size());
      s.from_node = dir == 0 ? a : b;
      s.to_node = dir == 0 ? b : a;
      s.road_type = type;
      s.length_m = len;
      s.lanes = lanes_for(type);
      s.one_way = false;
      s.speed_kph = speed_for(type);
      net.segments.push_back(s);
    }
  };

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      add_street(r * cols + c, r * cols + c + 1, horizontal_type(r));
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c)
      add_street(r * cols + c, (r + 1) * cols + c, vertical_type(c));

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      auto& n = net.intersections[r * cols + c];
      const bool h_major = line_is_major(r);
      const bool v_major = line_is_major(c);
      const double u = unit(rng);
      if (h_major && v_major) {
        n.tag = NodeTag::traffic_signal;
      } else if (h_major || v_major) {
        n.tag = u < 0.8 ? NodeTag::crossing : NodeTag::traffic_signal;
      } else if (u < 0.55) {
        n.tag = NodeTag::none;
      } else if (u < 0.70) {
        n.tag = NodeTag::stop;
      } else if (u < 0.80) {
        n.tag = NodeTag::crossing;
      } else if (u < 0.88) {
        n.tag = NodeTag::turn_circle;
      } else if (u < 0.95) {
        n.tag = NodeTag::bus_stop;
      } else {
        n.tag = NodeTag::speed_camera;
      }
    }

  std::vector<std::set<std::pair<int, int>>> streets(net.intersections.size());
  for (const auto& s : net.segments) {
    auto key = std::minmax(s.from_node, s.to_node);
    streets[s.from_node].insert(key);
    streets[s.to_node].insert(key);
  }
  for (auto& n : net.intersections) n.street_count = static_cast<int>(streets[n.id].size());

  roadnet::validate_and_build(net);
  return net;
}

OracleField assign_oracle(const RoadNetwork& net, int slots, std::uint64_t seed) {
  if (slots < 1) throw std::invalid_argument("assign_oracle: slots must be >= 1");
  std::mt19937_64 rng(splitmix64(seed ^ 0x0ac1efull));

  OracleField field;
  field.slots = slots;
  field.mu_e.resize(net.num_segments(), slots);
  field.sigma_e.resize(net.num_segments(), slots);
  field.mu_v.resize(net.num_intersections(), slots);
  field.sigma_v.resize(net.num_intersections(), slots);

  for (const auto& s : net.segments) {
    const double ff = s.free_flow_seconds();
    for (int t = 0; t < slots; ++t) {
      const double mu = ff * congestion_multiplier(t, slots, s.road_type);
      field.mu_e(s.id, t) = mu;
      field.sigma_e(s.id, t) = 0.15 * mu;
    }
  }

  double bump_max = 0.0;
  for (int t = 0; t < slots; ++t)
    bump_max = std::max(bump_max, rush_bump((t + 0.5) * 24.0 / slots));

  auto base_range = [](NodeTag tag) -> std::pair<double, double> {
    switch (tag) {
      case NodeTag::traffic_signal:
        return {20.0, 40.0};
      case NodeTag::crossing:
        return {5.0, 10.0};
      case NodeTag::stop:
        return {4.0, 8.0};
      case NodeTag::speed_camera:
        return {1.0, 3.0};
      case NodeTag::turn_circle:
        return {2.0, 5.0};
      case NodeTag::bus_stop:
        return {3.0, 7.0};
      case NodeTag::none:
        return {0.0, 0.0};
    }
    return {0.0, 0.0};
  };

  for (const auto& n : net.intersections) {
    auto [lo, hi] = base_range(n.tag);
    std::uniform_real_distribution<double> dist(lo, hi);
    const double base = (hi > 0.0) ? dist(rng) : 0.0;
    for (int t = 0; t < slots; ++t) {
      const double bnorm = bump_max > 0.0 ? rush_bump((t + 0.5) * 24.0 / slots) / bump_max : 0.0;
      const double mu = base * (0.4 + 0.6 * bnorm);
      field.mu_v(n.id, t) = mu;
      field.sigma_v(n.id, t) = std::max(0.25 * mu, 0.1);
    }
  }
  return field;
}

double context_factor(int weather_code, int holiday_code) {
  const double weather = 1.0 + 0.10 * (weather_code - 1.5) / 1.5;
  const double holiday = holiday_code ? 0.95 : 1.0;
  return weather * holiday;
}

double route_free_flow_seconds(const RoadNetwork& net, const std::vector<int>& edges) {
  double total = 0.0;
  for (int e : edges) total += net.segments[e].free_flow_seconds();
  return total;
}

double route_oracle_mean(const RoadNetwork& net, const OracleField& oracle, int slot,
                         const std::vector<int>& edges, double factor) {
  double total = 0.0;
  for (int e : edges) total += factor * oracle.mu_e(e, slot);
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    total += factor * oracle.mu_v(net.segments[edges[i]].to_node, slot);
  return total;
}

double route_oracle_variance(const RoadNetwork& net, const OracleField& oracle, int slot,
                             const std::vector<int>& edges, double factor) {
  double total = 0.0;
  for (int e : edges) {
    const double s = factor * oracle.sigma_e(e, slot);
    total += s * s;
  }
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const double s = factor * oracle.sigma_v(net.segments[edges[i]].to_node, slot);
    total += s * s;
  }
  return total;
}

double draw_route_seconds(const RoadNetwork& net, const OracleField& oracle, int slot,
                          const std::vector<int>& edges, double factor, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  double total = 0.0;
  for (int e : edges) {
    total += factor * oracle.mu_e(e, slot) +
             factor * oracle.sigma_e(e, slot) * gauss(rng);
  }
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const int v = net.segments[edges[i]].to_node;
    total += factor * oracle.mu_v(v, slot) + factor * oracle.sigma_v(v, slot) * gauss(rng);
  }
  return std::max(total, 0.5 * route_free_flow_seconds(net, edges));
}

// --- k lowest-mean-time routes (Yen over the link graph) ---------------------

namespace {

struct PathCost {
  double cost;
  std::vector<int> edges;
  bool operator>(const PathCost& o) const {
    if (cost != o.cost) return cost > o.cost;
    return edges > o.edges;
  }
};

double path_seconds(const RoadNetwork& net, const Eigen::VectorXd& edge_seconds,
                    const Eigen::VectorXd& node_seconds, const std::vector<int>& edges) {
  double total = edge_seconds[edges[0]];
  for (size_t i = 1; i < edges.size(); ++i)
    total += node_seconds[net.segments[edges[i - 1]].to_node] + edge_seconds[edges[i]];
  return total;
}

// Dijkstra over segments; arc i->j costs node_seconds[shared] + edge_seconds[j].
std::vector<int> dijkstra_time(const RoadNetwork& net, const Eigen::VectorXd& edge_seconds,
                               const Eigen::VectorXd& node_seconds, int origin, int dest,
                               const std::vector<char>& banned_edge,
                               const std::set<std::pair<int, int>>& banned_arc) {
  const int n = net.num_segments();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  if (banned_edge[origin]) return {};
  dist[origin] = edge_seconds[origin];
  heap.emplace(dist[origin], origin);
  while (!heap.empty()) {
    auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    if (i == dest) break;
    for (int j : net.out_links[i]) {
      if (banned_edge[j] || banned_arc.count({i, j})) continue;
      const double nd = d + node_seconds[net.segments[i].to_node] + edge_seconds[j];
      if (nd < dist[j]) {
        dist[j] = nd;
        prev[j] = i;
        heap.emplace(nd, j);
      }
    }
  }
  if (!std::isfinite(dist[dest])) return {};
  std::vector<int> path;
  for (int at = dest; at != -1; at = prev[at]) path.push_back(at);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

std::vector<std::vector<int>> k_lowest_time_routes(const RoadNetwork& net,
                                                   const Eigen::VectorXd& edge_seconds,
                                                   const Eigen::VectorXd& node_seconds, int origin,
                                                   int dest, int k) {
  std::vector<std::vector<int>> accepted;
  std::vector<char> no_ban(net.num_segments(), 0);
  std::vector<int> first = dijkstra_time(net, edge_seconds, node_seconds, origin, dest, no_ban, {});
  if (first.empty()) return accepted;
  accepted.push_back(first);

  std::priority_queue<PathCost, std::vector<PathCost>, std::greater<PathCost>> candidates;
  std::set<std::vector<int>> known;
  known.insert(first);

  while (static_cast<int>(accepted.size()) < k) {
    const auto& prev_path = accepted.back();
    for (size_t spur = 0; spur + 1 < prev_path.size(); ++spur) {
      std::vector<int> root(prev_path.begin(), prev_path.begin() + spur + 1);
      std::set<std::pair<int, int>> banned_arc;
      for (const auto& p : accepted) {
        if (p.size() > spur + 1 && std::equal(root.begin(), root.end(), p.begin()))
          banned_arc.insert({p[spur], p[spur + 1]});
      }
      std::vector<char> banned_edge(net.num_segments(), 0);
      for (size_t i = 0; i < spur; ++i) banned_edge[root[i]] = 1;
      std::vector<int> spur_path = dijkstra_time(net, edge_seconds, node_seconds,
                                                 prev_path[spur], dest, banned_edge, banned_arc);
      if (spur_path.empty()) continue;
      std::vector<int> full(root.begin(), root.end() - 1);
      full.insert(full.end(), spur_path.begin(), spur_path.end());
      if (known.insert(full).second)
        candidates.push({path_seconds(net, edge_seconds, node_seconds, full), full});
    }
    if (candidates.empty()) break;
    accepted.push_back(candidates.top().edges);
    candidates.pop();
  }
  return accepted;
}

// --- trip sampling ------------------------------------------------------------

namespace {

int hop_distance(const RoadNetwork& net, int origin, int dest) {
  if (origin == dest) return 0;
  std::vector<int> dist(net.num_segments(), -1);
  std::queue<int> q;
  dist[origin] = 0;
  q.push(origin);
  while (!q.empty()) {
    int i = q.front();
    q.pop();
    for (int j : net.out_links[i]) {
      if (dist[j] != -1) continue;
      dist[j] = dist[i] + 1;
      if (j == dest) return dist[j];
      q.push(j);
    }
  }
  return -1;
}

}  // namespace

TripSample sample_trips(const RoadNetwork& net, const OracleField& oracle, int n, int slot,
                        std::uint64_t seed, double tau_choice, int workers) {
  if (n < 1) throw std::invalid_argument("sample_trips: n must be >= 1");
  if (slot < 0 || slot >= oracle.slots)
    throw std::invalid_argument("sample_trips: slot out of range");

  std::mt19937_64 day_rng(splitmix64(seed ^ 0xda7ac0deull));
  const int weather = static_cast<int>(day_rng() % 4);
  const int holiday = (day_rng() % 5 == 0) ? 1 : 0;
  const double factor = context_factor(weather, holiday);

  const Eigen::VectorXd edge_seconds = factor * oracle.mu_e.col(slot);
  const Eigen::VectorXd node_seconds = factor * oracle.mu_v.col(slot);

  TripSample out;
  out.records.resize(n);
  out.truths.resize(n);

  auto run_trip = [&](int t) {
    std::mt19937_64 rng(splitmix64(seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(t) + 1)));
    std::uniform_int_distribution<int> pick(0, net.num_segments() - 1);

    int origin = -1, dest = -1;
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
      origin = pick(rng);
      dest = pick(rng);
      if (origin == dest) continue;
      const int hops = hop_distance(net, origin, dest);
      if (hops >= 3 && hops <= 25) found = true;
    }
    if (!found)
      throw std::runtime_error("sample_trips: no reachable OD pair within hop range after 200 tries (trip " +
                               std::to_string(t) + ")");

    auto routes = k_lowest_time_routes(net, edge_seconds, node_seconds, origin, dest, 8);
    if (routes.empty()) throw std::runtime_error("sample_trips: route enumeration failed");

    std::vector<double> mean_time(routes.size());
    for (size_t r = 0; r < routes.size(); ++r)
      mean_time[r] = route_oracle_mean(net, oracle, slot, routes[r], factor);

    size_t chosen = 0;
    if (tau_choice <= 1e-9) {
      chosen = static_cast<size_t>(
          std::min_element(mean_time.begin(), mean_time.end()) - mean_time.begin());
    } else {
      const double best = *std::min_element(mean_time.begin(), mean_time.end());
      std::vector<double> w(routes.size());
      double total = 0.0;
      for (size_t r = 0; r < routes.size(); ++r)
        total += w[r] = std::exp(-(mean_time[r] - best) / tau_choice);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      double u = unit(rng) * total;
      for (size_t r = 0; r < routes.size(); ++r) {
        u -= w[r];
        if (u <= 0.0) {
          chosen = r;
          break;
        }
      }
    }

    ODRecord rec;
    rec.origin_edge = origin;
    rec.dest_edge = dest;
    rec.slot = slot;
    rec.weather_code = weather;
    rec.holiday_code = holiday;
    rec.observed_T = draw_route_seconds(net, oracle, slot, routes[chosen], factor, rng);
    out.records[t] = rec;
    out.truths[t] = {t, routes[chosen]};
  };

  if (workers <= 1) {
    for (int t = 0; t < n; ++t) run_trip(t);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    auto worker = [&]() {
      for (int t; (t = next.fetch_add(1)) < n && !failed.load();) {
        try {
          run_trip(t);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          failed = true;
          if (error.empty()) error = e.what();
        }
      }
    };
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw std::runtime_error(error);
  }
  return out;
}

// --- file formats ---------------------------------------------------------

void save_od_csv(const std::string& path, const std::vector<ODRecord>& records,
                 long first_record_index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write OD file " + path);
  out << "record_index,origin_edge,dest_edge,slot,weather,holiday,observed_T\n";
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << (first_record_index + static_cast<long>(i)) << ',' << r.origin_edge << ','
        << r.dest_edge << ',' << r.slot << ',' << r.weather_code << ',' << r.holiday_code << ','
        << fmt6(r.observed_T) << '\n';
  }
}

LoadedOD load_od_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open OD file " + path);
  LoadedOD out;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("OD file is empty: " + path);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ODRecord r;
    long idx;
    double T;
    if (std::sscanf(line.c_str(), "%ld,%d,%d,%d,%d,%d,%lf", &idx, &r.origin_edge, &r.dest_edge,
                    &r.slot, &r.weather_code, &r.holiday_code, &T) != 7)
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed OD row");
    r.observed_T = T;
    if (r.origin_edge == r.dest_edge)
      throw ParseError(path + ":" + std::to_string(lineno) + ": origin_edge equals dest_edge");
    if (!(r.observed_T > 0.0))
      throw ParseError(path + ":" + std::to_string(lineno) + ": observed_T must be positive");
    out.record_index.push_back(idx);
    out.records.push_back(r);
  }
  return out;
}

void append_gt_csv(std::ostream& out, const std::vector<TripGroundTruth>& truths,
                   long index_offset, bool header) {
  if (header) out << "record_index,route_edges\n";
  for (const auto& t : truths) {
    out << (index_offset + t.record_index) << ',';
    for (size_t i = 0; i < t.route_edges.size(); ++i) {
      if (i) out << '|';
      out << t.route_edges[i];
    }
    out << '\n';
  }
}

void save_gt_csv(const std::string& path, const std::vector<TripGroundTruth>& truths) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write ground-truth file " + path);
  append_gt_csv(out, truths, 0, true);
}

std::vector<TripGroundTruth> load_gt_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open ground-truth file " + path);
  std::vector<TripGroundTruth> out;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("ground-truth file is empty: " + path);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed ground-truth row");
    TripGroundTruth t;
    t.record_index = std::stoi(line.substr(0, comma));
    std::stringstream edges(line.substr(comma + 1));
    std::string tok;
    while (std::getline(edges, tok, '|'))
      if (!tok.empty()) t.route_edges.push_back(std::stoi(tok));
    if (t.route_edges.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty route");
    out.push_back(std::move(t));
  }
  return out;
}

void save_oracle_csv(const std::string& path, const OracleField& oracle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write oracle file " + path);
  out << "kind,id,slot,mu,sigma\n";
  for (long e = 0; e < oracle.mu_e.rows(); ++e)
    for (int t = 0; t < oracle.slots; ++t)
      out << "e," << e << ',' << t << ',' << fmt6(oracle.mu_e(e, t)) << ','
          << fmt6(oracle.sigma_e(e, t)) << '\n';
  for (long v = 0; v < oracle.mu_v.rows(); ++v)
    for (int t = 0; t < oracle.slots; ++t)
      out << "v," << v << ',' << t << ',' << fmt6(oracle.mu_v(v, t)) << ','
          << fmt6(oracle.sigma_v(v, t)) << '\n';
}

OracleField load_oracle_csv(const std::string& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open oracle file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("oracle file is empty: " + path);

  struct Row {
    char kind;
    int id, slot;
    double mu, sigma;
  };
  std::vector<Row> rows;
  int max_slot = -1;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Row r;
    if (std::sscanf(line.c_str(), "%c,%d,%d,%lf,%lf", &r.kind, &r.id, &r.slot, &r.mu, &r.sigma) != 5)
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed oracle row");
    max_slot = std::max(max_slot, r.slot);
    rows.push_back(r);
  }
  if (max_slot < 0) throw ParseError("oracle file has no rows: " + path);

  OracleField field;
  field.slots = max_slot + 1;
  field.mu_e = Eigen::MatrixXd::Zero(net.num_segments(), field.slots);
  field.sigma_e = Eigen::MatrixXd::Zero(net.num_segments(), field.slots);
  field.mu_v = Eigen::MatrixXd::Zero(net.num_intersections(), field.slots);
  field.sigma_v = Eigen::MatrixXd::Zero(net.num_intersections(), field.slots);
  for (const auto& r : rows) {
    if (r.kind == 'e') {
      if (r.id < 0 || r.id >= net.num_segments())
        throw ParseError(path + ": oracle edge id out of range: " + std::to_string(r.id));
      field.mu_e(r.id, r.slot) = r.mu;
      field.sigma_e(r.id, r.slot) = r.sigma;
    } else if (r.kind == 'v') {
      if (r.id < 0 || r.id >= net.num_intersections())
        throw ParseError(path + ": oracle node id out of range: " + std::to_string(r.id));
      field.mu_v(r.id, r.slot) = r.mu;
      field.sigma_v(r.id, r.slot) = r.sigma;
    } else {
      throw ParseError(path + ": oracle kind must be e or v");
    }
  }
  return field;
}

}  // namespace mwsl::sim
