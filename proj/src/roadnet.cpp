#include "mwsl/roadnet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mwsl::roadnet {

namespace {

const char* kNodeTagNames[kNumNodeTags] = {
    "traffic_signal", "crossing", "stop", "speed_camera", "turn_circle", "bus_stop", "none",
};

const char* kRoadTypeNames[kNumRoadTypes] = {
    "trunk",     "trunk_link",     "freeway_link", "primary",  "primary_link",
    "secondary", "secondary_link", "tertiary",     "tertiary_link",
};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

const char* to_string(NodeTag tag) { return kNodeTagNames[static_cast<int>(tag)]; }
const char* to_string(RoadType type) { return kRoadTypeNames[static_cast<int>(type)]; }

NodeTag node_tag_from_string(const std::string& s) {
  for (int i = 0; i < kNumNodeTags; ++i)
    if (s == kNodeTagNames[i]) return static_cast<NodeTag>(i);
  throw ParseError("unknown node tag \"" + s + "\"");
}

RoadType road_type_from_string(const std::string& s) {
  for (int i = 0; i < kNumRoadTypes; ++i)
    if (s == kRoadTypeNames[i]) return static_cast<RoadType>(i);
  throw ParseError("unknown road type \"" + s + "\"");
}

int road_class(RoadType t) {
  switch (t) {
    case RoadType::trunk:
    case RoadType::freeway_link:
    case RoadType::primary:
      return 0;
    case RoadType::trunk_link:
    case RoadType::primary_link:
      return 1;
    case RoadType::secondary:
    case RoadType::tertiary:
      return 2;
    case RoadType::secondary_link:
    case RoadType::tertiary_link:
      return 3;
  }
  return 0;
}

int relation_of(RoadType from_type, RoadType to_type) {
  return road_class(from_type) * 4 + road_class(to_type);
}

int RoadNetwork::pair_index(int i, int j) const {
  for (int p = pair_offset[i]; p < pair_offset[i + 1]; ++p)
    if (pair_to[p] == j) return p;
  return -1;
}

void build_link_adjacency(RoadNetwork& net) {
  const int num_edges = net.num_segments();
  const int num_nodes = net.num_intersections();

  // Reverse twins: same street driven the other way. Matched greedily in
  // insertion order so parallel multi-edges pair up deterministically.
  net.reverse_twin.assign(num_edges, -1);
  std::map<std::pair<int, int>, std::vector<int>> by_endpoints;
  for (const auto& s : net.segments) by_endpoints[{s.from_node, s.to_node}].push_back(s.id);
  for (const auto& s : net.segments) {
    if (net.reverse_twin[s.id] != -1) continue;
    auto it = by_endpoints.find({s.to_node, s.from_node});
    if (it == by_endpoints.end()) continue;
    for (int cand : it->second) {
      if (net.reverse_twin[cand] != -1) continue;
      if (std::abs(net.segments[cand].length_m - s.length_m) <= 1.0) {
        net.reverse_twin[s.id] = cand;
        net.reverse_twin[cand] = s.id;
        break;
      }
    }
  }

  std::vector<std::vector<int>> starting_at(num_nodes);
  for (const auto& s : net.segments) starting_at[s.from_node].push_back(s.id);
  for (auto& v : starting_at) std::sort(v.begin(), v.end());

  net.out_links.assign(num_edges, {});
  net.pair_from.clear();
  net.pair_to.clear();
  net.pair_relation.clear();
  net.pair_offset.assign(num_edges + 1, 0);
  for (const auto& s : net.segments) {
    for (int j : starting_at[s.to_node]) {
      if (j == s.id || j == net.reverse_twin[s.id]) continue;
      net.out_links[s.id].push_back(j);
    }
  }
  for (int i = 0; i < num_edges; ++i) {
    net.pair_offset[i] = static_cast<int>(net.pair_from.size());
    for (int j : net.out_links[i]) {
      net.pair_from.push_back(i);
      net.pair_to.push_back(j);
      net.pair_relation.push_back(
          relation_of(net.segments[i].road_type, net.segments[j].road_type));
    }
  }
  net.pair_offset[num_edges] = static_cast<int>(net.pair_from.size());

  // Node-wise graph. The relation of arc u->v realized by segment s pairs the
  // dominant incoming road class at u with the class of s; nodes with no
  // incoming segment fall back to relation 0.
  std::vector<int> dominant_in_class(num_nodes, -1);
  {
    std::vector<std::array<int, 4>> counts(num_nodes, {0, 0, 0, 0});
    for (const auto& s : net.segments) counts[s.to_node][road_class(s.road_type)]++;
    for (int u = 0; u < num_nodes; ++u) {
      int best = -1, best_count = 0;
      for (int c = 0; c < 4; ++c)
        if (counts[u][c] > best_count) best_count = counts[u][c], best = c;
      dominant_in_class[u] = best;
    }
  }
  net.node_out.assign(num_nodes, {});
  net.node_out_relation.assign(num_nodes, {});
  for (const auto& s : net.segments) {
    auto& outs = net.node_out[s.from_node];
    if (std::find(outs.begin(), outs.end(), s.to_node) != outs.end()) continue;
    int rel = 0;
    if (dominant_in_class[s.from_node] >= 0)
      rel = dominant_in_class[s.from_node] * 4 + road_class(s.road_type);
    outs.push_back(s.to_node);
    net.node_out_relation[s.from_node].push_back(rel);
  }
  for (int u = 0; u < num_nodes; ++u) {
    // keep neighbor lists ascending for deterministic traversal
    std::vector<int> order(net.node_out[u].size());
    for (size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return net.node_out[u][a] < net.node_out[u][b]; });
    std::vector<int> nodes, rels;
    for (int k : order) {
      nodes.push_back(net.node_out[u][k]);
      rels.push_back(net.node_out_relation[u][k]);
    }
    net.node_out[u] = std::move(nodes);
    net.node_out_relation[u] = std::move(rels);
  }
}

void validate_and_build(RoadNetwork& net) {
  const int num_nodes = net.num_intersections();
  const int num_edges = net.num_segments();
  if (num_nodes == 0) throw ValidationError("network has no intersections");
  if (num_edges == 0) throw ValidationError("network has no segments");

  std::sort(net.intersections.begin(), net.intersections.end(),
            [](const Intersection& a, const Intersection& b) { return a.id < b.id; });
  std::sort(net.segments.begin(), net.segments.end(),
            [](const RoadSegment& a, const RoadSegment& b) { return a.id < b.id; });
  for (int i = 0; i < num_nodes; ++i)
    if (net.intersections[i].id != i)
      throw ValidationError("node ids are not dense 0..N-1: missing or duplicate id " +
                            std::to_string(i));
  for (int i = 0; i < num_edges; ++i)
    if (net.segments[i].id != i)
      throw ValidationError("segment ids are not dense 0..E-1: missing or duplicate id " +
                            std::to_string(i));

  for (const auto& s : net.segments) {
    const std::string where = "segment " + std::to_string(s.id);
    if (s.from_node < 0 || s.from_node >= num_nodes)
      throw ValidationError(where + " references missing node " + std::to_string(s.from_node));
    if (s.to_node < 0 || s.to_node >= num_nodes)
      throw ValidationError(where + " references missing node " + std::to_string(s.to_node));
    if (s.from_node == s.to_node) throw ValidationError(where + " is a self loop");
    if (!(s.length_m > 0.0)) throw ValidationError(where + " has non-positive length");
    if (!(s.speed_kph > 0.0)) throw ValidationError(where + " has non-positive speed limit");
    if (s.lanes < 1) throw ValidationError(where + " has lanes < 1");
  }

  // street_count = number of distinct undirected streets touching the node
  // (a two-way twin pair is one street).
  std::vector<std::set<std::pair<int, int>>> streets(num_nodes);
  for (const auto& s : net.segments) {
    auto key = std::minmax(s.from_node, s.to_node);
    streets[s.from_node].insert(key);
    streets[s.to_node].insert(key);
  }
  for (const auto& n : net.intersections) {
    if (n.street_count < 1)
      throw ValidationError("node " + std::to_string(n.id) + " has street_count < 1");
    if (n.street_count != static_cast<int>(streets[n.id].size()))
      throw ValidationError("node " + std::to_string(n.id) + " street_count " +
                            std::to_string(n.street_count) + " does not match incident streets " +
                            std::to_string(streets[n.id].size()));
  }

  // weak connectivity over intersections
  std::vector<std::vector<int>> undirected(num_nodes);
  for (const auto& s : net.segments) {
    undirected[s.from_node].push_back(s.to_node);
    undirected[s.to_node].push_back(s.from_node);
  }
  std::vector<char> seen(num_nodes, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : undirected[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
  }
  if (reached != num_nodes) {
    int missing = 0;
    while (seen[missing]) ++missing;
    throw ValidationError("network is not weakly connected: node " + std::to_string(missing) +
                          " unreachable from node 0");
  }

  build_link_adjacency(net);
}

std::string network_to_json(const RoadNetwork& net) {
  std::string out;
  out += "{\n  \"nodes\": [\n";
  for (size_t i = 0; i < net.intersections.size(); ++i) {
    const auto& n = net.intersections[i];
    out += "    {\"id\": " + std::to_string(n.id) + ", \"lat\": " + fmt6(n.lat) +
           ", \"lon\": " + fmt6(n.lon) + ", \"tag\": \"" + to_string(n.tag) +
           "\", \"street_count\": " + std::to_string(n.street_count) + "}";
    out += (i + 1 < net.intersections.size()) ? ",\n" : "\n";
  }
  out += "  ],\n  \"edges\": [\n";
  for (size_t i = 0; i < net.segments.size(); ++i) {
    const auto& s = net.segments[i];
    out += "    {\"id\": " + std::to_string(s.id) + ", \"u\": " + std::to_string(s.from_node) +
           ", \"v\": " + std::to_string(s.to_node) + ", \"type\": \"" + to_string(s.road_type) +
           "\", \"length_m\": " + fmt6(s.length_m) + ", \"lanes\": " + std::to_string(s.lanes) +
           ", \"one_way\": " + (s.one_way ? "true" : "false") +
           ", \"speed_kph\": " + fmt6(s.speed_kph) + "}";
    out += (i + 1 < net.segments.size()) ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

RoadNetwork network_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network JSON parse failed: ") + e.what());
  }
  RoadNetwork net;
  try {
    if (!doc.contains("nodes") || !doc.contains("edges"))
      throw ParseError("network JSON must contain \"nodes\" and \"edges\"");
    for (const auto& j : doc.at("nodes")) {
      Intersection n;
      n.id = j.at("id").get<int>();
      n.lat = j.at("lat").get<double>();
      n.lon = j.at("lon").get<double>();
      n.tag = node_tag_from_string(j.at("tag").get<std::string>());
      n.street_count = j.at("street_count").get<int>();
      net.intersections.push_back(n);
    }
    for (const auto& j : doc.at("edges")) {
      RoadSegment s;
      s.id = j.at("id").get<int>();
      s.from_node = j.at("u").get<int>();
      s.to_node = j.at("v").get<int>();
      s.road_type = road_type_from_string(j.at("type").get<std::string>());
      s.length_m = j.at("length_m").get<double>();
      s.lanes = j.at("lanes").get<int>();
      s.one_way = j.at("one_way").get<bool>();
      s.speed_kph = j.at("speed_kph").get<double>();
      net.segments.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network JSON field error: ") + e.what());
  }
  validate_and_build(net);
  return net;
}

RoadNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open network file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return network_from_json(buf.str());
}

void save_network(const RoadNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write network file " + path);
  out << network_to_json(net);
}

}  // namespace mwsl::roadnet
