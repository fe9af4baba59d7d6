#pragma once

#include <string>
#include <vector>

#include "mwsl/errors.hpp"

namespace mwsl::roadnet {

enum class NodeTag {
  traffic_signal,
  crossing,
  stop,
  speed_camera,
  turn_circle,
  bus_stop,
  none,
};
constexpr int kNumNodeTags = 7;

enum class RoadType {
  trunk,
  trunk_link,
  freeway_link,
  primary,
  primary_link,
  secondary,
  secondary_link,
  tertiary,
  tertiary_link,
};
constexpr int kNumRoadTypes = 9;

// Road-type pairs are collapsed onto 4 classes before labeling relations;
// 9x9 = 81 raw pairs would starve the per-relation weights on small graphs.
//   major = trunk | freeway_link | primary        -> 0
//   major_link = trunk_link | primary_link        -> 1
//   minor = secondary | tertiary                  -> 2
//   minor_link = secondary_link | tertiary_link   -> 3
constexpr int kNumRelations = 16;

const char* to_string(NodeTag tag);
const char* to_string(RoadType type);
NodeTag node_tag_from_string(const std::string& s);
RoadType road_type_from_string(const std::string& s);

int road_class(RoadType t);
int relation_of(RoadType from_type, RoadType to_type);

struct Intersection {
  int id = 0;
  double lat = 0.0;
  double lon = 0.0;
  NodeTag tag = NodeTag::none;
  int street_count = 0;
};

struct RoadSegment {
  int id = 0;
  int from_node = 0;
  int to_node = 0;
  RoadType road_type = RoadType::tertiary;
  double length_m = 0.0;
  int lanes = 1;
  bool one_way = false;
  double speed_kph = 0.0;

  double free_flow_seconds() const { return length_m / (speed_kph / 3.6); }
};

// Dual-graph road model. The link-wise graph (segment -> following segments)
// and the node-wise graph (intersection -> reachable intersections) are
// derived once by build_link_adjacency and are immutable afterwards.
struct RoadNetwork {
  std::vector<Intersection> intersections;
  std::vector<RoadSegment> segments;

  // Link-wise graph. out_links[i] is ascending by segment id and never
  // contains i itself or its reverse twin (no immediate U-turn).
  std::vector<std::vector<int>> out_links;

  // Flattened (i -> j) pairs in row-major order: pairs of segment i occupy
  // [pair_offset[i], pair_offset[i+1]).
  std::vector<int> pair_from;
  std::vector<int> pair_to;
  std::vector<int> pair_offset;
  std::vector<int> pair_relation;

  // reverse_twin[i] = segment id of the opposite direction of the same
  // street, or -1 for one-way segments.
  std::vector<int> reverse_twin;

  // Node-wise graph with the same 16 relation labels.
  std::vector<std::vector<int>> node_out;
  std::vector<std::vector<int>> node_out_relation;

  int num_segments() const { return static_cast<int>(segments.size()); }
  int num_intersections() const { return static_cast<int>(intersections.size()); }
  int num_pairs() const { return static_cast<int>(pair_from.size()); }

  // Index into the flattened pair arrays, or -1 when j cannot follow i.
  int pair_index(int i, int j) const;
};

// Derives out_links, the flattened pair arrays, reverse twins and the
// node-wise graph. Total on validated networks.
void build_link_adjacency(RoadNetwork& net);

// Checks every structural invariant (dense ids, dangling references,
// positive lengths and speeds, street counts, weak connectivity) and then
// builds the adjacency. Throws ValidationError naming the offending record.
void validate_and_build(RoadNetwork& net);

// Canonical JSON form: fixed field order, floats with 6 decimals, one record
// per line. save(load(f)) is byte-identical for canonical files.
std::string network_to_json(const RoadNetwork& net);
RoadNetwork network_from_json(const std::string& text);

RoadNetwork load_network(const std::string& path);
void save_network(const RoadNetwork& net, const std::string& path);

}  // namespace mwsl::roadnet
