#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mwsl/roadnet.hpp"
#include "mwsl/simulator.hpp"

using namespace mwsl;
using namespace mwsl::roadnet;

namespace {

// 4-node ring, every street two-way: 8 directed segments.
const char* kRingJson = R"({
  "nodes": [
    {"id": 0, "lat": 34.000000, "lon": 108.000000, "tag": "none", "street_count": 2},
    {"id": 1, "lat": 34.001000, "lon": 108.000000, "tag": "crossing", "street_count": 2},
    {"id": 2, "lat": 34.001000, "lon": 108.001000, "tag": "none", "street_count": 2},
    {"id": 3, "lat": 34.000000, "lon": 108.001000, "tag": "stop", "street_count": 2}
  ],
  "edges": [
    {"id": 0, "u": 0, "v": 1, "type": "primary", "length_m": 111.000000, "lanes": 2, "one_way": false, "speed_kph": 60.000000},
    {"id": 1, "u": 1, "v": 0, "type": "primary", "length_m": 111.000000, "lanes": 2, "one_way": false, "speed_kph": 60.000000},
    {"id": 2, "u": 1, "v": 2, "type": "secondary", "length_m": 92.000000, "lanes": 1, "one_way": false, "speed_kph": 40.000000},
    {"id": 3, "u": 2, "v": 1, "type": "secondary", "length_m": 92.000000, "lanes": 1, "one_way": false, "speed_kph": 40.000000},
    {"id": 4, "u": 2, "v": 3, "type": "primary", "length_m": 111.500000, "lanes": 2, "one_way": false, "speed_kph": 60.000000},
    {"id": 5, "u": 3, "v": 2, "type": "primary", "length_m": 111.500000, "lanes": 2, "one_way": false, "speed_kph": 60.000000},
    {"id": 6, "u": 3, "v": 0, "type": "tertiary", "length_m": 95.000000, "lanes": 1, "one_way": false, "speed_kph": 30.000000},
    {"id": 7, "u": 0, "v": 3, "type": "tertiary", "length_m": 95.000000, "lanes": 1, "one_way": false, "speed_kph": 30.000000}
  ]
})";

int independent_class(RoadType t) {
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
    default:
      return 3;
  }
}

}  // namespace

TEST_CASE("ring fixture loads with 4 intersections and 8 segments") {
  auto net = network_from_json(kRingJson);
  CHECK(net.num_intersections() == 4);
  CHECK(net.num_segments() == 8);
}

TEST_CASE("dangling node reference is a validation error naming the segment") {
  std::string bad = kRingJson;
  bad.replace(bad.find("\"u\": 0, \"v\": 3"), 14, "\"u\": 0, \"v\": 99");
  CHECK_THROWS_WITH_AS(network_from_json(bad),
                       doctest::Contains("segment 7 references missing node 99"), ValidationError);
}

TEST_CASE("zero-length segment rejected") {
  std::string bad = kRingJson;
  bad.replace(bad.find("\"length_m\": 92.000000"), 21, "\"length_m\": 0.000000");
  CHECK_THROWS_AS(network_from_json(bad), ValidationError);
}

TEST_CASE("disconnected network rejected") {
  const char* split = R"({
    "nodes": [
      {"id": 0, "lat": 34.0, "lon": 108.0, "tag": "none", "street_count": 1},
      {"id": 1, "lat": 34.1, "lon": 108.0, "tag": "none", "street_count": 1},
      {"id": 2, "lat": 35.0, "lon": 109.0, "tag": "none", "street_count": 1},
      {"id": 3, "lat": 35.1, "lon": 109.0, "tag": "none", "street_count": 1}
    ],
    "edges": [
      {"id": 0, "u": 0, "v": 1, "type": "primary", "length_m": 100.0, "lanes": 1, "one_way": false, "speed_kph": 50.0},
      {"id": 1, "u": 1, "v": 0, "type": "primary", "length_m": 100.0, "lanes": 1, "one_way": false, "speed_kph": 50.0},
      {"id": 2, "u": 2, "v": 3, "type": "primary", "length_m": 100.0, "lanes": 1, "one_way": false, "speed_kph": 50.0},
      {"id": 3, "u": 3, "v": 2, "type": "primary", "length_m": 100.0, "lanes": 1, "one_way": false, "speed_kph": 50.0}
    ]
  })";
  CHECK_THROWS_WITH_AS(network_from_json(split), doctest::Contains("not weakly connected"),
                       ValidationError);
}

TEST_CASE("street_count mismatch rejected") {
  std::string bad = kRingJson;
  bad.replace(bad.find("\"street_count\": 2"), 17, "\"street_count\": 3");
  CHECK_THROWS_WITH_AS(network_from_json(bad), doctest::Contains("street_count"), ValidationError);
}

TEST_CASE("malformed json is a parse error") {
  CHECK_THROWS_AS(network_from_json("{nope"), ParseError);
  CHECK_THROWS_AS(network_from_json("{\"nodes\": []}"), ParseError);
}

TEST_CASE("save-load round trip is byte identical on a simulator city") {
  auto net = sim::generate_city(8, 7, 3);
  CHECK(net.num_segments() >= 190);
  const std::string once = network_to_json(net);
  auto reloaded = network_from_json(once);
  CHECK(network_to_json(reloaded) == once);
}

TEST_CASE("U-turn exclusion: reverse twin never follows its twin") {
  auto net = network_from_json(kRingJson);
  for (const auto& s : net.segments) {
    const int twin = net.reverse_twin[s.id];
    REQUIRE(twin >= 0);  // all ring streets are two-way
    for (int j : net.out_links[s.id]) CHECK(j != twin);
  }
}

TEST_CASE("T-junction: each incoming segment has exactly 2 out links") {
  // center node 0 with two-way arms to 1, 2, 3
  std::ostringstream t;
  t << R"({"nodes": [
    {"id": 0, "lat": 34.0, "lon": 108.0, "tag": "crossing", "street_count": 3},
    {"id": 1, "lat": 34.1, "lon": 108.0, "tag": "none", "street_count": 1},
    {"id": 2, "lat": 34.0, "lon": 108.1, "tag": "none", "street_count": 1},
    {"id": 3, "lat": 33.9, "lon": 108.0, "tag": "none", "street_count": 1}
  ], "edges": [)";
  int id = 0;
  for (int arm = 1; arm <= 3; ++arm) {
    t << (id ? "," : "") << R"({"id": )" << id++ << R"(, "u": )" << arm
      << R"(, "v": 0, "type": "secondary", "length_m": 120.0, "lanes": 1, "one_way": false, "speed_kph": 40.0})";
    t << "," << R"({"id": )" << id++ << R"(, "u": 0, "v": )" << arm
      << R"(, "type": "secondary", "length_m": 120.0, "lanes": 1, "one_way": false, "speed_kph": 40.0})";
  }
  t << "]}";
  auto net = network_from_json(t.str());

  // brute-force adjacency straight from the definition
  for (const auto& s : net.segments) {
    std::set<int> expect;
    for (const auto& j : net.segments)
      if (j.from_node == s.to_node && j.id != s.id && j.id != net.reverse_twin[s.id])
        expect.insert(j.id);
    std::set<int> got(net.out_links[s.id].begin(), net.out_links[s.id].end());
    CHECK(got == expect);
    if (s.to_node == 0) CHECK(got.size() == 2);
  }
}

TEST_CASE("relation_of matches the collapse table") {
  CHECK(relation_of(RoadType::primary, RoadType::primary) == 0);
  CHECK(relation_of(RoadType::trunk_link, RoadType::tertiary) == 6);
  CHECK(relation_of(RoadType::primary, RoadType::secondary) == 2);

  std::set<int> seen;
  for (int a = 0; a < kNumRoadTypes; ++a)
    for (int b = 0; b < kNumRoadTypes; ++b) {
      const auto ta = static_cast<RoadType>(a);
      const auto tb = static_cast<RoadType>(b);
      const int rel = relation_of(ta, tb);
      CHECK(rel == independent_class(ta) * 4 + independent_class(tb));
      CHECK(rel >= 0);
      CHECK(rel < kNumRelations);
      CHECK(relation_of(ta, tb) == rel);  // pure
      seen.insert(rel);
    }
  CHECK(seen.size() <= 16);
}

TEST_CASE("pair arrays agree with out_links and carry relations") {
  auto net = sim::generate_city(5, 5, 9);
  for (int i = 0; i < net.num_segments(); ++i) {
    std::set<int> row(net.out_links[i].begin(), net.out_links[i].end());
    CHECK(row.size() == net.out_links[i].size());  // no duplicates
    CHECK(row.count(i) == 0);
    CHECK(static_cast<int>(row.size()) == net.pair_offset[i + 1] - net.pair_offset[i]);
    for (int p = net.pair_offset[i]; p < net.pair_offset[i + 1]; ++p) {
      CHECK(net.pair_from[p] == i);
      CHECK(row.count(net.pair_to[p]) == 1);
      CHECK(net.pair_relation[p] ==
            relation_of(net.segments[i].road_type, net.segments[net.pair_to[p]].road_type));
      CHECK(net.pair_index(i, net.pair_to[p]) == p);
    }
  }
}

TEST_CASE("node graph covers every distinct node arc") {
  auto net = sim::generate_city(4, 4, 2);
  std::set<std::pair<int, int>> arcs;
  for (const auto& s : net.segments) arcs.insert({s.from_node, s.to_node});
  size_t listed = 0;
  for (int u = 0; u < net.num_intersections(); ++u) {
    listed += net.node_out[u].size();
    for (size_t k = 0; k < net.node_out[u].size(); ++k) {
      CHECK(arcs.count({u, net.node_out[u][k]}) == 1);
      CHECK(net.node_out_relation[u][k] >= 0);
      CHECK(net.node_out_relation[u][k] < kNumRelations);
    }
  }
  CHECK(listed == arcs.size());
}
