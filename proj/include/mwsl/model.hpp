#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mwsl/autodiff.hpp"
#include "mwsl/roadnet.hpp"

namespace mwsl::model {

// Desk-scale widths; the reference embedding sizes are scaled down so a full
// finite-difference sweep of the model runs in seconds.
struct ModelConfig {
  int d_id_edge = 32;
  int d_road_type = 8;
  int d_lanes = 4;
  int d_one_way = 2;
  int d_id_node = 24;
  int d_node_tag = 2;
  int d_street_count = 2;
  int d_weather = 8;
  int d_holiday = 4;
  int d_hidden = 32;
  int d_out = 16;
  int layers = 3;
  int slots = 24;  // I
  int max_lanes = 8;
  int max_street_count = 8;
  double node_time_scale = 5.0;  // seconds; anchors the node heads
  double sigma_floor = 1e-3;

  int edge_feature_width() const { return d_id_edge + d_road_type + d_lanes + d_one_way + 1; }
  int node_feature_width() const { return d_id_node + d_node_tag + d_street_count + 2; }
};

struct Context {
  int slot = 0;
  int weather = 0;
  int holiday = 0;
};

// Per-relation neighbor lists of one graph: pair k of relation relations[r]
// sends a message src[r][k] -> dst[r][k]. Only non-empty relations appear.
struct GraphStructure {
  int num_entities = 0;
  std::vector<int> relations;
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> dst;
};

struct ModelGraph {
  GraphStructure edge_graph;
  GraphStructure node_graph;
};

ModelGraph build_model_graph(const roadnet::RoadNetwork& net);

struct ModelParams {
  ModelConfig cfg;
  ad::ParamStore store;
};

ModelParams init_params(const roadnet::RoadNetwork& net, const ModelConfig& cfg,
                        std::uint64_t seed);

// Plain per-slot snapshot of the distribution heads.
struct GaussianField {
  Eigen::VectorXd mu_e, sigma_e;  // seconds per segment
  Eigen::VectorXd mu_v, sigma_v;  // seconds per intersection
};

// Row-stochastic transition probabilities, aligned with the network's
// flattened (i -> j) pair arrays.
struct TransitionModel {
  std::vector<double> prob;
  std::vector<double> log_prob;
};

struct ForwardResult {
  ad::Value h_edge, h_node;
  ad::Value mu_e, sigma_e;  // |E| x 1
  ad::Value mu_v, sigma_v;  // |V| x 1
  ad::Value pair_log_prob;  // num_pairs x 1, log-softmax per origin segment

  GaussianField field() const;
  TransitionModel transition() const;
};

// Per-segment / per-node input rows: concatenated categorical embeddings plus
// scaled length (edges) or min-max normalized coordinates (nodes).
ad::Value embed_edge_features(const roadnet::RoadNetwork& net, ModelParams& params);
ad::Value embed_node_features(const roadnet::RoadNetwork& net, ModelParams& params);

// One stacked layer: returns (h^(l+1), c^(l)) with c^(l) = GRU(h^(l), c^(l-1)).
// Layers 0 and 1 convolve h directly; layers >= 2 convolve a width-preserving
// projection of [c^(l-1), h^(l)].
std::pair<ad::Value, ad::Value> rgcn_layer(const ad::Value& h, const ad::Value& c_prev,
                                           const GraphStructure& graph, ModelParams& params,
                                           const std::string& graph_tag, int layer);

ad::Value rgcn_stack(const ad::Value& h0, const GraphStructure& graph, ModelParams& params,
                     const std::string& graph_tag);

// Distribution heads: rank-1 product of projected entity features with the
// slot's context-modulated time-embedding column, softplus-anchored.
void heads_forward(const roadnet::RoadNetwork& net, ModelParams& params, const Context& ctx,
                   const ad::Value& h_edge, const ad::Value& h_node, ForwardResult& out);

ad::Value transition_forward(const roadnet::RoadNetwork& net, ModelParams& params,
                             const ad::Value& h_edge);

ForwardResult model_forward(const roadnet::RoadNetwork& net, const ModelGraph& graph,
                            ModelParams& params, const Context& ctx);
ForwardResult model_forward(const roadnet::RoadNetwork& net, ModelParams& params,
                            const Context& ctx);

}  // namespace mwsl::model
