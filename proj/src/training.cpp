#include "mwsl/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "mwsl/errors.hpp"
#include "mwsl/eval.hpp"

namespace mwsl::train {

using ad::Value;
using roadnet::RoadNetwork;

// --- config ---------------------------------------------------------------

std::vector<std::string> TrainingConfig::violations() const {
  std::vector<std::string> v;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  check(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
  check(beta >= 0.0 && beta <= 1.0, "beta must be in [0, 1]");
  check(alpha + beta <= 1.0 + 1e-12, "alpha + beta must be <= 1");
  check(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must be in [0, 1]");
  check(epsilon_decay > 0.0 && epsilon_decay <= 1.0, "epsilon_decay must be in (0, 1]");
  check(m >= 1, "m must be >= 1");
  check(delta_lens >= 0.0, "delta_lens must be >= 0");
  check(delta_probs >= 0.0 && delta_probs < 1.0, "delta_probs must be in [0, 1)");
  check(lr > 0.0, "lr must be > 0");
  check(beta1 >= 0.0 && beta1 < 1.0, "betas[0] must be in [0, 1)");
  check(beta2 >= 0.0 && beta2 < 1.0, "betas[1] must be in [0, 1)");
  check(epochs >= 1, "epochs must be >= 1");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(kl_temperature > 0.0, "kl_temperature must be > 0");
  check(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
  return v;
}

std::string TrainingConfig::to_text() const {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "alpha=" << num(alpha) << "\n";
  out << "beta=" << num(beta) << "\n";
  out << "epsilon=" << num(epsilon) << "\n";
  out << "epsilon_decay=" << num(epsilon_decay) << "\n";
  out << "m=" << m << "\n";
  out << "delta_lens=" << num(delta_lens) << "\n";
  out << "delta_probs=" << num(delta_probs) << "\n";
  out << "lr=" << num(lr) << "\n";
  out << "betas=" << num(beta1) << "," << num(beta2) << "\n";
  out << "epochs=" << epochs << "\n";
  out << "batch_size=" << batch_size << "\n";
  out << "kl_temperature=" << num(kl_temperature) << "\n";
  out << "seed=" << seed << "\n";
  out << "train_fraction=" << num(train_fraction) << "\n";
  out << "refresh_per_batch=" << (refresh_per_batch ? 1 : 0) << "\n";
  return out.str();
}

TrainingConfig TrainingConfig::from_text(const std::string& text) {
  TrainingConfig cfg;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "alpha") {
        cfg.alpha = std::stod(value);
      } else if (key == "beta") {
        cfg.beta = std::stod(value);
      } else if (key == "epsilon") {
        cfg.epsilon = std::stod(value);
      } else if (key == "epsilon_decay") {
        cfg.epsilon_decay = std::stod(value);
      } else if (key == "m") {
        cfg.m = std::stoi(value);
      } else if (key == "delta_lens") {
        cfg.delta_lens = std::stod(value);
      } else if (key == "delta_probs") {
        cfg.delta_probs = std::stod(value);
      } else if (key == "lr") {
        cfg.lr = std::stod(value);
      } else if (key == "betas") {
        const auto comma = value.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("betas needs two values");
        cfg.beta1 = std::stod(value.substr(0, comma));
        cfg.beta2 = std::stod(value.substr(comma + 1));
      } else if (key == "epochs") {
        cfg.epochs = std::stoi(value);
      } else if (key == "batch_size") {
        cfg.batch_size = std::stoi(value);
      } else if (key == "kl_temperature") {
        cfg.kl_temperature = std::stod(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "train_fraction") {
        cfg.train_fraction = std::stod(value);
      } else if (key == "refresh_per_batch") {
        cfg.refresh_per_batch = std::stoi(value) != 0;
      } else {
        problems.push_back("line " + std::to_string(lineno) + ": unknown key \"" + key + "\"");
      }
    } catch (const std::exception&) {
      problems.push_back("line " + std::to_string(lineno) + ": cannot parse value for \"" + key +
                         "\"");
    }
  }
  for (const auto& v : cfg.violations()) problems.push_back(v);
  if (!problems.empty()) {
    std::string all = "invalid training config:";
    for (const auto& p : problems) all += "\n  - " + p;
    throw ParseError(all);
  }
  return cfg;
}

TrainingConfig TrainingConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

double epsilon_at_epoch(const TrainingConfig& cfg, int epoch) {
  return std::max(kEpsilonFloor, cfg.epsilon * std::pow(cfg.epsilon_decay, epoch));
}

bool in_train_split(long record_index, double train_fraction) {
  const std::uint64_t h = sim::splitmix64(static_cast<std::uint64_t>(record_index) ^ 0x5eedfaceull);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < train_fraction;
}

std::string log_header() {
  return "epoch,loss_total,loss_agg,loss_tp,loss_kl,val_rmse,val_mae,val_mape,route_acc_on_val,"
         "epsilon";
}

std::string log_row(const EpochLog& row) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", row.epoch,
                row.loss_total, row.loss_agg, row.loss_tp, row.loss_kl, row.val_rmse, row.val_mae,
                row.val_mape, row.route_acc, row.epsilon);
  return buf;
}

// --- losses ------------------------------------------------------------------

ad::Value loss_aggregate(const RoadNetwork& net, const std::vector<int>& route_edges, double T,
                         const model::ForwardResult& fwd) {
  std::vector<int> interior;
  for (size_t i = 0; i + 1 < route_edges.size(); ++i)
    interior.push_back(net.segments[route_edges[i]].to_node);

  Value q_mu = ad::sum(ad::gather_rows(fwd.mu_e, route_edges));
  Value var = ad::sum(ad::gather_rows(ad::square(fwd.sigma_e), route_edges));
  if (!interior.empty()) {
    q_mu = ad::add(q_mu, ad::sum(ad::gather_rows(fwd.mu_v, interior)));
    var = ad::add(var, ad::sum(ad::gather_rows(ad::square(fwd.sigma_v), interior)));
  }
  Value residual = ad::sub(Value::scalar(T), q_mu);
  Value quadratic = ad::div(ad::square(residual), ad::scale(var, 2.0));
  Value normalizer = ad::scale(ad::log(ad::scale(var, 2.0 * M_PI)), 0.5);
  return ad::add(quadratic, normalizer);
}

namespace {

std::vector<int> route_pair_indices(const RoadNetwork& net, const std::vector<int>& route_edges) {
  std::vector<int> pairs;
  for (size_t i = 1; i < route_edges.size(); ++i) {
    const int p = net.pair_index(route_edges[i - 1], route_edges[i]);
    if (p < 0)
      throw std::invalid_argument("route edges " + std::to_string(route_edges[i - 1]) + " -> " +
                                  std::to_string(route_edges[i]) + " are not adjacent");
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace

ad::Value loss_transition(const RoadNetwork& net, const std::vector<int>& route_edges,
                          const model::ForwardResult& fwd) {
  const std::vector<int> pairs = route_pair_indices(net, route_edges);
  if (pairs.empty()) return Value::scalar(0.0);
  return ad::scale(ad::sum(ad::gather_rows(fwd.pair_log_prob, pairs)), -1.0);
}

ad::Value kl_between(const std::vector<ad::Value>& candidate_scores,
                     const std::vector<double>& target_scores) {
  if (candidate_scores.empty() || candidate_scores.size() != target_scores.size())
    throw std::invalid_argument("kl_between: score lists must be non-empty and equal-length");
  const int n = static_cast<int>(candidate_scores.size());

  Value scores = ad::transpose(ad::concat_cols(candidate_scores));  // n x 1
  Value log_p = ad::segment_log_softmax(scores, {0, n});

  // constant log-softmax target
  double mx = *std::max_element(target_scores.begin(), target_scores.end());
  double lse = 0.0;
  for (double s : target_scores) lse += std::exp(s - mx);
  lse = std::log(lse) + mx;
  ad::Matrix log_q(n, 1);
  for (int i = 0; i < n; ++i) log_q(i, 0) = target_scores[i] - lse;

  return ad::sum(ad::mul(ad::exp(log_p), ad::sub(log_p, Value::constant(log_q))));
}

ad::Value loss_kl(const RoadNetwork& net, const route::CandidateSet& candidates, double T,
                  double temperature, const model::GaussianField& snapshot,
                  const model::ForwardResult& fwd) {
  if (candidates.empty()) throw std::invalid_argument("loss_kl: empty candidate set");
  std::vector<Value> cand_scores;
  std::vector<double> target_scores;
  for (const auto& r : candidates.routes) {
    const std::vector<int> pairs = route_pair_indices(net, r.edges);
    cand_scores.push_back(pairs.empty()
                              ? Value::scalar(0.0)
                              : ad::sum(ad::gather_rows(fwd.pair_log_prob, pairs)));
    target_scores.push_back(-std::abs(T - route::route_mean_time(net, snapshot, r.edges)) /
                           temperature);
  }
  return kl_between(cand_scores, target_scores);
}

// --- training loop -------------------------------------------------------------

namespace {

struct ContextKey {
  int slot, weather, holiday;
  bool operator<(const ContextKey& o) const {
    return std::tie(slot, weather, holiday) < std::tie(o.slot, o.weather, o.holiday);
  }
};

struct Snapshot {
  model::GaussianField field;
  model::TransitionModel transition;
};

ContextKey key_of(const sim::ODRecord& r) { return {r.slot, r.weather_code, r.holiday_code}; }

std::mt19937_64 record_rng(std::uint64_t seed, int epoch, long record_index) {
  const std::uint64_t a = sim::splitmix64(seed ^ 0xe90cull);
  const std::uint64_t b = sim::splitmix64(a + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1));
  return std::mt19937_64(b ^ sim::splitmix64(static_cast<std::uint64_t>(record_index)));
}

// Candidate refresh for a span of records, sharded over workers; results land
// at fixed indices so the merge is order-independent.
void refresh_candidates(const RoadNetwork& net, const Dataset& data,
                        const std::map<ContextKey, Snapshot>& snapshots,
                        const TrainingConfig& cfg, int workers,
                        std::vector<route::CandidateSet>& out) {
  out.resize(data.records.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (size_t i; (i = next.fetch_add(1)) < data.records.size() && !failed.load();) {
      try {
        const auto& rec = data.records[i];
        const auto& snap = snapshots.at(key_of(rec));
        const double sl = route::shortest_length(net, rec.origin_edge, rec.dest_edge);
        out[i] = route::enumerate_candidates(net, snap.transition, rec.origin_edge, rec.dest_edge,
                                             cfg.delta_lens * sl, cfg.delta_probs, cfg.m);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed = true;
        if (error.empty())
          error = "candidate refresh failed for record " + std::to_string(data.record_index[i]) +
                  ": " + e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failed) throw std::runtime_error(error);
}

}  // namespace

TrainResult train(const RoadNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                  model::ModelParams& params, int workers, int start_epoch,
                  EpochCallback on_epoch) {
  {
    const auto v = cfg.violations();
    if (!v.empty()) throw std::invalid_argument("train: invalid config: " + v.front());
  }
  if (data.records.empty()) throw std::invalid_argument("train: empty dataset");

  const model::ModelGraph graph = model::build_model_graph(net);

  std::vector<size_t> train_ids, val_ids;
  for (size_t i = 0; i < data.records.size(); ++i) {
    if (in_train_split(data.record_index[i], cfg.train_fraction))
      train_ids.push_back(i);
    else
      val_ids.push_back(i);
  }
  if (train_ids.empty()) throw std::invalid_argument("train: training split is empty");

  std::set<ContextKey> contexts;
  for (const auto& r : data.records) contexts.insert(key_of(r));

  TrainResult result;
  double best_val_mape = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<route::CandidateSet> candidates;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double eps = epsilon_at_epoch(cfg, epoch);

    // frozen per-context snapshot for candidate search and epsilon-greedy
    std::map<ContextKey, Snapshot> snapshots;
    for (const auto& key : contexts) {
      auto fwd = model::model_forward(net, graph, params,
                                      model::Context{key.slot, key.weather, key.holiday});
      snapshots[key] = Snapshot{fwd.field(), fwd.transition()};
    }
    refresh_candidates(net, data, snapshots, cfg, workers, candidates);

    // validation metrics against the pre-update model of this epoch
    EpochLog row;
    row.epoch = epoch;
    row.epsilon = eps;
    {
      std::vector<double> pred, truth;
      std::vector<double> accs;
      for (size_t i : val_ids) {
        const auto& rec = data.records[i];
        const auto& snap = snapshots.at(key_of(rec));
        route::Route best_route;
        if (!candidates[i].empty()) {
          best_route = candidates[i].routes.front();
        } else {
          best_route = route::shortest_path(net, rec.origin_edge, rec.dest_edge);
        }
        pred.push_back(route::route_mean_time(net, snap.field, best_route.edges));
        truth.push_back(rec.observed_T);
        auto gt = data.gt_routes.find(data.record_index[i]);
        if (gt != data.gt_routes.end())
          accs.push_back(eval::route_accuracy(net, gt->second, best_route.edges));
      }
      if (!pred.empty()) {
        const auto metrics = eval::tte_metrics(pred, truth);
        row.val_rmse = metrics.rmse;
        row.val_mae = metrics.mae;
        row.val_mape = metrics.mape;
      }
      row.route_acc = accs.empty()
                          ? std::numeric_limits<double>::quiet_NaN()
                          : std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
    }

    // mini-batches
    std::vector<size_t> order = train_ids;
    {
      std::mt19937_64 shuffle_rng(
          sim::splitmix64(cfg.seed ^ (0xba7c4e5ull + static_cast<std::uint64_t>(epoch))));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }

    double sum_total = 0.0, sum_agg = 0.0, sum_tp = 0.0, sum_kl = 0.0;
    long used = 0;
    const double kl_weight = 1.0 - cfg.alpha - cfg.beta;

    for (size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<size_t>(cfg.batch_size)) {
      const size_t batch_end =
          std::min(order.size(), batch_start + static_cast<size_t>(cfg.batch_size));

      if (cfg.refresh_per_batch && batch_start > 0) {
        snapshots.clear();
        for (const auto& key : contexts) {
          auto fwd = model::model_forward(net, graph, params,
                                          model::Context{key.slot, key.weather, key.holiday});
          snapshots[key] = Snapshot{fwd.field(), fwd.transition()};
        }
        refresh_candidates(net, data, snapshots, cfg, workers, candidates);
      }

      std::map<ContextKey, model::ForwardResult> forwards;
      Value batch_sum;
      long batch_used = 0;
      for (size_t bi = batch_start; bi < batch_end; ++bi) {
        const size_t i = order[bi];
        if (candidates[i].empty()) {
          ++row.records_skipped;
          continue;
        }
        const auto& rec = data.records[i];
        const ContextKey key = key_of(rec);
        auto fit = forwards.find(key);
        if (fit == forwards.end())
          fit = forwards
                    .emplace(key, model::model_forward(
                                      net, graph, params,
                                      model::Context{key.slot, key.weather, key.holiday}))
                    .first;
        const model::ForwardResult& fwd = fit->second;
        const Snapshot& snap = snapshots.at(key);

        auto rng = record_rng(cfg.seed, epoch, data.record_index[i]);
        const route::Route& selected =
            route::select_route(candidates[i], rec.observed_T, snap.field, net, eps, rng);

        Value l_agg = loss_aggregate(net, selected.edges, rec.observed_T, fwd);
        Value l_tp = loss_transition(net, selected.edges, fwd);
        Value l_kl = loss_kl(net, candidates[i], rec.observed_T, cfg.kl_temperature, snap.field, fwd);
        Value total = ad::add(ad::add(ad::scale(l_agg, cfg.alpha), ad::scale(l_tp, cfg.beta)),
                              ad::scale(l_kl, kl_weight));

        sum_agg += l_agg.item();
        sum_tp += l_tp.item();
        sum_kl += l_kl.item();
        sum_total += cfg.alpha * l_agg.item() + cfg.beta * l_tp.item() + kl_weight * l_kl.item();

        batch_sum = batch_sum.defined() ? ad::add(batch_sum, total) : total;
        ++batch_used;
      }
      if (batch_used == 0) continue;
      Value batch_loss = ad::scale(batch_sum, 1.0 / static_cast<double>(batch_used));
      if (!std::isfinite(batch_loss.item()))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(batch_start));
      params.store.zero_grads();
      ad::backward(batch_loss);
      adam_step(params.store, cfg.lr, {cfg.beta1, cfg.beta2});
      used += batch_used;
    }

    if (used > 0) {
      row.loss_total = sum_total / used;
      row.loss_agg = sum_agg / used;
      row.loss_tp = sum_tp / used;
      row.loss_kl = sum_kl / used;
    }
    result.log.push_back(row);
    result.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(row);

    if (row.val_mape < best_val_mape - 1e-9) {
      best_val_mape = row.val_mape;
      since_best = 0;
    } else if (++since_best >= kEarlyStopPatience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

// --- inference -------------------------------------------------------------------

InferResult infer_from_snapshot(const RoadNetwork& net, const model::GaussianField& field,
                                const model::TransitionModel& A, int origin, int dest,
                                const TrainingConfig& search) {
  InferResult out;
  const double sl = route::shortest_length(net, origin, dest);  // throws when unreachable
  auto candidates = route::enumerate_candidates(net, A, origin, dest, search.delta_lens * sl,
                                                search.delta_probs, search.m);
  if (!candidates.empty()) {
    out.route = candidates.routes.front();
  } else {
    out.route = route::shortest_path(net, origin, dest);
    out.fallback_shortest = true;
  }
  double total = 0.0;
  for (int e : out.route.edges) {
    out.breakdown.emplace_back("edge:" + std::to_string(e), field.mu_e[e]);
    total += field.mu_e[e];
  }
  for (int v : out.route.interior_nodes(net)) {
    out.breakdown.emplace_back("node:" + std::to_string(v), field.mu_v[v]);
    total += field.mu_v[v];
  }
  out.predicted_T = total;
  return out;
}

InferResult infer(const RoadNetwork& net, model::ModelParams& params, const sim::ODRecord& od,
                  const TrainingConfig& search) {
  auto fwd = model::model_forward(net, params,
                                  model::Context{od.slot, od.weather_code, od.holiday_code});
  return infer_from_snapshot(net, fwd.field(), fwd.transition(), od.origin_edge, od.dest_edge,
                             search);
}

}  // namespace mwsl::train
