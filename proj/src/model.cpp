#include "mwsl/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "mwsl/errors.hpp"

namespace mwsl::model {

using ad::Value;
using roadnet::RoadNetwork;

namespace {

void collect_pairs(GraphStructure& g, const std::vector<int>& relation_of_pair,
                   const std::vector<int>& srcs, const std::vector<int>& dsts) {
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_relation;
  for (size_t k = 0; k < relation_of_pair.size(); ++k) {
    auto& bucket = by_relation[relation_of_pair[k]];
    bucket.first.push_back(srcs[k]);
    bucket.second.push_back(dsts[k]);
  }
  for (auto& [rel, bucket] : by_relation) {
    g.relations.push_back(rel);
    g.src.push_back(std::move(bucket.first));
    g.dst.push_back(std::move(bucket.second));
  }
}

}  // namespace

ModelGraph build_model_graph(const RoadNetwork& net) {
  ModelGraph g;
  g.edge_graph.num_entities = net.num_segments();
  collect_pairs(g.edge_graph, net.pair_relation, net.pair_from, net.pair_to);

  g.node_graph.num_entities = net.num_intersections();
  std::vector<int> rel, src, dst;
  for (int u = 0; u < net.num_intersections(); ++u)
    for (size_t k = 0; k < net.node_out[u].size(); ++k) {
      src.push_back(u);
      dst.push_back(net.node_out[u][k]);
      rel.push_back(net.node_out_relation[u][k]);
    }
  collect_pairs(g.node_graph, rel, src, dst);
  return g;
}

namespace {

ad::Matrix normal_matrix(std::mt19937_64& rng, long rows, long cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

void add_linear(ad::ParamStore& store, std::mt19937_64& rng, const std::string& name, long in,
                long out) {
  store.add(name + ".W", normal_matrix(rng, in, out, 1.0 / std::sqrt(static_cast<double>(in))));
  store.add(name + ".b", ad::Matrix::Zero(1, out));
}

}  // namespace

ModelParams init_params(const RoadNetwork& net, const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams params;
  params.cfg = cfg;
  ad::ParamStore& s = params.store;
  std::mt19937_64 rng(seed ^ 0x6d7953616c74ull);

  const double emb_std = 0.3;
  s.add("edge.id_emb", normal_matrix(rng, net.num_segments(), cfg.d_id_edge, emb_std));
  s.add("edge.type_emb", normal_matrix(rng, roadnet::kNumRoadTypes, cfg.d_road_type, emb_std));
  s.add("edge.lanes_emb", normal_matrix(rng, cfg.max_lanes, cfg.d_lanes, emb_std));
  s.add("edge.oneway_emb", normal_matrix(rng, 2, cfg.d_one_way, emb_std));
  s.add("node.id_emb", normal_matrix(rng, net.num_intersections(), cfg.d_id_node, emb_std));
  s.add("node.tag_emb", normal_matrix(rng, roadnet::kNumNodeTags, cfg.d_node_tag, emb_std));
  s.add("node.sc_emb", normal_matrix(rng, cfg.max_street_count, cfg.d_street_count, emb_std));
  s.add("ctx.weather_emb", normal_matrix(rng, 4, cfg.d_weather, emb_std));
  s.add("ctx.holiday_emb", normal_matrix(rng, 2, cfg.d_holiday, emb_std));
  s.add("ctx.proj", normal_matrix(rng, cfg.d_weather + cfg.d_holiday, cfg.d_out,
                                  0.1 / std::sqrt(static_cast<double>(cfg.d_weather + cfg.d_holiday))));
  s.add("time.table", normal_matrix(rng, cfg.slots, cfg.d_out, 0.5));

  for (const std::string& g : {std::string("edge"), std::string("node")}) {
    const int w_in = g == "edge" ? cfg.edge_feature_width() : cfg.node_feature_width();
    const int d = cfg.d_hidden;
    add_linear(s, rng, g + ".in_proj", w_in, d);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string layer = g + ".l" + std::to_string(l);
      s.add(layer + ".W0", normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d))));
      for (int r = 0; r < roadnet::kNumRelations; ++r)
        s.add(layer + ".r" + std::to_string(r) + ".W",
              normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d))));
      if (l >= 2) add_linear(s, rng, layer + ".concat_proj", 2 * d, d);
    }
    for (const char* gate : {"o", "q", "h"}) {
      s.add(g + ".gru.W" + std::string(gate),
            normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d))));
      s.add(g + ".gru.O" + std::string(gate),
            normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d))));
      s.add(g + ".gru.b" + std::string(gate), ad::Matrix::Zero(1, d));
    }
  }

  for (const char* head : {"mu_e", "sigma_e"}) {
    s.add(std::string("head.") + head + ".W",
          normal_matrix(rng, cfg.d_hidden, cfg.d_out, 1.0 / std::sqrt(cfg.d_hidden)));
    s.add(std::string("head.") + head + ".b", ad::Matrix::Zero(net.num_segments(), 1));
  }
  for (const char* head : {"mu_v", "sigma_v"}) {
    s.add(std::string("head.") + head + ".W",
          normal_matrix(rng, cfg.d_hidden, cfg.d_out, 1.0 / std::sqrt(cfg.d_hidden)));
    s.add(std::string("head.") + head + ".b", ad::Matrix::Zero(net.num_intersections(), 1));
  }

  add_linear(s, rng, "trans.l1", 2 * cfg.d_hidden, 32);
  add_linear(s, rng, "trans.l2", 32, 1);
  return params;
}

// --- feature embedding ------------------------------------------------------

Value embed_edge_features(const RoadNetwork& net, ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  std::vector<int> type_idx, lanes_idx, oneway_idx;
  ad::Matrix length_col(net.num_segments(), 1);
  for (const auto& seg : net.segments) {
    type_idx.push_back(static_cast<int>(seg.road_type));
    if (seg.lanes < 1 || seg.lanes > cfg.max_lanes)
      throw ValidationError("segment " + std::to_string(seg.id) + ": lanes " +
                            std::to_string(seg.lanes) + " outside embedding table 1.." +
                            std::to_string(cfg.max_lanes));
    lanes_idx.push_back(seg.lanes - 1);
    oneway_idx.push_back(seg.one_way ? 1 : 0);
    length_col(seg.id, 0) = seg.length_m / 1000.0;
  }
  return ad::concat_cols({params.store.at("edge.id_emb"),
                          ad::gather_rows(params.store.at("edge.type_emb"), type_idx),
                          ad::gather_rows(params.store.at("edge.lanes_emb"), lanes_idx),
                          ad::gather_rows(params.store.at("edge.oneway_emb"), oneway_idx),
                          Value::constant(length_col)});
}

Value embed_node_features(const RoadNetwork& net, ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  double lat_min = net.intersections[0].lat, lat_max = lat_min;
  double lon_min = net.intersections[0].lon, lon_max = lon_min;
  for (const auto& n : net.intersections) {
    lat_min = std::min(lat_min, n.lat);
    lat_max = std::max(lat_max, n.lat);
    lon_min = std::min(lon_min, n.lon);
    lon_max = std::max(lon_max, n.lon);
  }
  auto norm = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; };

  std::vector<int> tag_idx, sc_idx;
  ad::Matrix coords(net.num_intersections(), 2);
  for (const auto& n : net.intersections) {
    tag_idx.push_back(static_cast<int>(n.tag));
    if (n.street_count < 1 || n.street_count > cfg.max_street_count)
      throw ValidationError("node " + std::to_string(n.id) + ": street_count " +
                            std::to_string(n.street_count) + " outside embedding table 1.." +
                            std::to_string(cfg.max_street_count));
    sc_idx.push_back(n.street_count - 1);
    coords(n.id, 0) = norm(n.lat, lat_min, lat_max);
    coords(n.id, 1) = norm(n.lon, lon_min, lon_max);
  }
  return ad::concat_cols({params.store.at("node.id_emb"),
                          ad::gather_rows(params.store.at("node.tag_emb"), tag_idx),
                          ad::gather_rows(params.store.at("node.sc_emb"), sc_idx),
                          Value::constant(coords)});
}

// --- stacked relational layers ----------------------------------------------

namespace {

Value gru_cell(const Value& h, const Value& c_prev, ad::ParamStore& s, const std::string& g) {
  Value o = ad::sigmoid(ad::add(
      ad::add(ad::matmul(h, s.at(g + ".gru.Wo")), ad::matmul(c_prev, s.at(g + ".gru.Oo"))),
      s.at(g + ".gru.bo")));
  Value q = ad::sigmoid(ad::add(
      ad::add(ad::matmul(h, s.at(g + ".gru.Wq")), ad::matmul(c_prev, s.at(g + ".gru.Oq"))),
      s.at(g + ".gru.bq")));
  Value cand = ad::tanh(ad::add(ad::add(ad::matmul(h, s.at(g + ".gru.Wh")),
                                        ad::matmul(ad::mul(q, c_prev), s.at(g + ".gru.Oh"))),
                                s.at(g + ".gru.bh")));
  Value ones = Value::constant(ad::Matrix::Ones(o.rows(), o.cols()));
  return ad::add(ad::mul(o, c_prev), ad::mul(ad::sub(ones, o), cand));
}

}  // namespace

std::pair<Value, Value> rgcn_layer(const Value& h, const Value& c_prev,
                                   const GraphStructure& graph, ModelParams& params,
                                   const std::string& graph_tag, int layer) {
  ad::ParamStore& s = params.store;
  Value c_out = gru_cell(h, c_prev, s, graph_tag);

  const std::string prefix = graph_tag + ".l" + std::to_string(layer);
  Value input = h;
  if (layer >= 2) {
    Value cat = ad::concat_cols({c_prev, h});
    input = ad::add(ad::matmul(cat, s.at(prefix + ".concat_proj.W")),
                    s.at(prefix + ".concat_proj.b"));
  }

  Value agg = ad::matmul(input, s.at(prefix + ".W0"));
  for (size_t k = 0; k < graph.relations.size(); ++k) {
    Value messages = ad::matmul(ad::gather_rows(input, graph.src[k]),
                                s.at(prefix + ".r" + std::to_string(graph.relations[k]) + ".W"));
    agg = ad::add(agg, ad::scatter_mean(messages, graph.dst[k], graph.num_entities));
  }
  return {ad::tanh(agg), c_out};
}

Value rgcn_stack(const Value& h0, const GraphStructure& graph, ModelParams& params,
                 const std::string& graph_tag) {
  ad::ParamStore& s = params.store;
  Value h = ad::add(ad::matmul(h0, s.at(graph_tag + ".in_proj.W")),
                    s.at(graph_tag + ".in_proj.b"));
  Value c_prev = Value::zeros(static_cast<int>(h.rows()), params.cfg.d_hidden);
  for (int l = 0; l < params.cfg.layers; ++l) {
    auto [h_next, c_out] = rgcn_layer(h, c_prev, graph, params, graph_tag, l);
    h = h_next;
    c_prev = c_out;
  }
  return h;
}

// --- heads -------------------------------------------------------------------

namespace {

Value modulated_time_column(ModelParams& params, const Context& ctx) {
  const ModelConfig& cfg = params.cfg;
  if (ctx.slot < 0 || ctx.slot >= cfg.slots)
    throw std::invalid_argument("slot " + std::to_string(ctx.slot) + " outside 0.." +
                                std::to_string(cfg.slots - 1));
  if (ctx.weather < 0 || ctx.weather >= 4)
    throw std::invalid_argument("weather code " + std::to_string(ctx.weather) + " outside 0..3");
  if (ctx.holiday < 0 || ctx.holiday >= 2)
    throw std::invalid_argument("holiday code " + std::to_string(ctx.holiday) + " outside 0..1");

  Value tcol = ad::gather_rows(params.store.at("time.table"), {ctx.slot});  // 1 x d_out
  Value wemb = ad::gather_rows(params.store.at("ctx.weather_emb"), {ctx.weather});
  Value hemb = ad::gather_rows(params.store.at("ctx.holiday_emb"), {ctx.holiday});
  Value ctx_proj = ad::matmul(ad::concat_cols({wemb, hemb}), params.store.at("ctx.proj"));
  Value mod = ad::mul(tcol, ad::offset(ctx_proj, 1.0));
  return ad::transpose(mod);  // d_out x 1
}

Value head_raw(ModelParams& params, const Value& h, const std::string& name,
               const Value& time_col) {
  Value proj = ad::add(ad::matmul(h, params.store.at("head." + name + ".W")),
                       params.store.at("head." + name + ".b"));
  return ad::matmul(proj, time_col);  // entities x 1
}

}  // namespace

void heads_forward(const RoadNetwork& net, ModelParams& params, const Context& ctx,
                   const Value& h_edge, const Value& h_node, ForwardResult& out) {
  Value time_col = modulated_time_column(params, ctx);

  ad::Matrix ff(net.num_segments(), 1);
  for (const auto& seg : net.segments) ff(seg.id, 0) = seg.free_flow_seconds();
  Value ff_col = Value::constant(ff);

  // congestion delay above free flow; mu_e never drops below the physical bound
  out.mu_e = ad::add(ad::mul(ad::softplus(head_raw(params, h_edge, "mu_e", time_col)), ff_col),
                     ff_col);
  out.sigma_e = ad::offset(
      ad::mul(ad::softplus(head_raw(params, h_edge, "sigma_e", time_col)), ff_col),
      params.cfg.sigma_floor);
  out.mu_v = ad::scale(ad::softplus(head_raw(params, h_node, "mu_v", time_col)),
                       params.cfg.node_time_scale);
  out.sigma_v = ad::offset(ad::scale(ad::softplus(head_raw(params, h_node, "sigma_v", time_col)),
                                     params.cfg.node_time_scale),
                           params.cfg.sigma_floor);
}

Value transition_forward(const RoadNetwork& net, ModelParams& params, const Value& h_edge) {
  if (net.num_pairs() == 0) return Value::constant(ad::Matrix::Zero(0, 1));
  Value pair_feats = ad::concat_cols({ad::gather_rows(h_edge, net.pair_from),
                                      ad::gather_rows(h_edge, net.pair_to)});
  Value hidden = ad::relu(
      ad::add(ad::matmul(pair_feats, params.store.at("trans.l1.W")), params.store.at("trans.l1.b")));
  Value logits =
      ad::add(ad::matmul(hidden, params.store.at("trans.l2.W")), params.store.at("trans.l2.b"));
  return ad::segment_log_softmax(logits, net.pair_offset);
}

ForwardResult model_forward(const RoadNetwork& net, const ModelGraph& graph, ModelParams& params,
                            const Context& ctx) {
  ForwardResult out;
  Value h0_e = embed_edge_features(net, params);
  Value h0_v = embed_node_features(net, params);
  out.h_edge = rgcn_stack(h0_e, graph.edge_graph, params, "edge");
  out.h_node = rgcn_stack(h0_v, graph.node_graph, params, "node");
  heads_forward(net, params, ctx, out.h_edge, out.h_node, out);
  out.pair_log_prob = transition_forward(net, params, out.h_edge);
  return out;
}

ForwardResult model_forward(const RoadNetwork& net, ModelParams& params, const Context& ctx) {
  return model_forward(net, build_model_graph(net), params, ctx);
}

GaussianField ForwardResult::field() const {
  GaussianField f;
  f.mu_e = mu_e.data().col(0);
  f.sigma_e = sigma_e.data().col(0);
  f.mu_v = mu_v.data().col(0);
  f.sigma_v = sigma_v.data().col(0);
  return f;
}

TransitionModel ForwardResult::transition() const {
  TransitionModel t;
  const long n = pair_log_prob.rows();
  t.log_prob.resize(n);
  t.prob.resize(n);
  for (long p = 0; p < n; ++p) {
    t.log_prob[p] = pair_log_prob.data()(p, 0);
    t.prob[p] = std::exp(t.log_prob[p]);
  }
  return t;
}

}  // namespace mwsl::model
