#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mwsl/roadnet.hpp"

namespace mwsl::sim {

// True generative parameters behind the observed travel times, per entity and
// time slot. mu_e always sits at or above the free-flow seconds of the edge.
struct OracleField {
  int slots = 0;
  Eigen::MatrixXd mu_e, sigma_e;  // |E| x slots
  Eigen::MatrixXd mu_v, sigma_v;  // |V| x slots
};

struct ODRecord {
  int origin_edge = 0;
  int dest_edge = 0;
  int slot = 0;
  int weather_code = 0;
  int holiday_code = 0;
  double observed_T = 0.0;
};

struct TripGroundTruth {
  int record_index = 0;
  std::vector<int> route_edges;
};

struct TripSample {
  std::vector<ODRecord> records;
  std::vector<TripGroundTruth> truths;
};

// Perturbed grid city: rows x cols intersections on a jittered lattice,
// two-way streets along lattice lines, every 3rd line an arterial.
// Deterministic in seed.
roadnet::RoadNetwork generate_city(int rows, int cols, std::uint64_t seed);

// Congestion-profiled oracle: mu_e = free_flow * congestion(slot, type) with
// congestion in [1, 4] peaking morning/evening; sigma_e = 0.15 mu_e; node
// delays by tag (signals 20-40 s at peak, crossings 5-10 s, none 0) with
// sigma_v = 0.25 mu_v floored at 0.1 s.
OracleField assign_oracle(const roadnet::RoadNetwork& net, int slots, std::uint64_t seed);

// Multiplicative congestion shift for a day's weather/holiday codes, within
// +-10% of nominal.
double context_factor(int weather_code, int holiday_code);

// Sum of oracle means over route edges and interior intersections.
double route_oracle_mean(const roadnet::RoadNetwork& net, const OracleField& oracle, int slot,
                         const std::vector<int>& edges, double factor = 1.0);
double route_oracle_variance(const roadnet::RoadNetwork& net, const OracleField& oracle, int slot,
                             const std::vector<int>& edges, double factor = 1.0);
double route_free_flow_seconds(const roadnet::RoadNetwork& net, const std::vector<int>& edges);

// One Gaussian draw of the route's total time, clamped at 0.5x free flow.
double draw_route_seconds(const roadnet::RoadNetwork& net, const OracleField& oracle, int slot,
                          const std::vector<int>& edges, double factor, std::mt19937_64& rng);

// k lowest-mean-time simple routes between two segments (Yen's algorithm over
// the link graph). Used only by the simulator's driver model.
std::vector<std::vector<int>> k_lowest_time_routes(const roadnet::RoadNetwork& net,
                                                   const Eigen::VectorXd& edge_seconds,
                                                   const Eigen::VectorXd& node_seconds, int origin,
                                                   int dest, int k);

// Weakly labeled trips: OD pairs drawn uniformly at shortest-hop distance in
// [3, 25], route chosen by softmax over -mean_time / tau_choice among the 8
// fastest, observed_T a Gaussian draw per component. Sharding by trip index
// gives identical output at any worker count.
TripSample sample_trips(const roadnet::RoadNetwork& net, const OracleField& oracle, int n,
                        int slot, std::uint64_t seed, double tau_choice = 60.0, int workers = 1);

// substream derivation used for per-trip RNGs
std::uint64_t splitmix64(std::uint64_t x);

// --- file formats -----------------------------------------------------------

void save_od_csv(const std::string& path, const std::vector<ODRecord>& records,
                 long first_record_index);
struct LoadedOD {
  std::vector<long> record_index;
  std::vector<ODRecord> records;
};
LoadedOD load_od_csv(const std::string& path);

void save_gt_csv(const std::string& path, const std::vector<TripGroundTruth>& truths);
void append_gt_csv(std::ostream& out, const std::vector<TripGroundTruth>& truths,
                   long index_offset, bool header);
std::vector<TripGroundTruth> load_gt_csv(const std::string& path);

void save_oracle_csv(const std::string& path, const OracleField& oracle);
OracleField load_oracle_csv(const std::string& path, const roadnet::RoadNetwork& net);

}  // namespace mwsl::sim
