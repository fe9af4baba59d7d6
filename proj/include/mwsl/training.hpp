#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mwsl/model.hpp"
#include "mwsl/routesearch.hpp"
#include "mwsl/simulator.hpp"

namespace mwsl::train {

// Every field maps to one key in the flat key=value config file; betas is
// written as "b1,b2". delta_lens is a fraction of each OD's shortest length.
struct TrainingConfig {
  double alpha = 0.8;
  double beta = 0.1;
  double epsilon = 0.2;
  double epsilon_decay = 0.95;
  int m = 8;
  double delta_lens = 0.5;
  double delta_probs = 1e-4;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int epochs = 50;
  int batch_size = 16;
  double kl_temperature = 30.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  bool refresh_per_batch = false;

  std::vector<std::string> violations() const;
  std::string to_text() const;
  static TrainingConfig from_text(const std::string& text);
  static TrainingConfig from_file(const std::string& path);
};

constexpr double kEpsilonFloor = 0.05;
constexpr int kEarlyStopPatience = 10;

// Exploration rate at a given epoch under the multiplicative schedule.
double epsilon_at_epoch(const TrainingConfig& cfg, int epoch);

// Stable hash split on the record index; identical across runs and machines.
bool in_train_split(long record_index, double train_fraction);

struct Dataset {
  std::vector<long> record_index;
  std::vector<sim::ODRecord> records;
  // eval-only ground truth, used for the route_acc_on_val log column when
  // available; never consulted for supervision.
  std::map<long, std::vector<int>> gt_routes;
};

struct EpochLog {
  int epoch = 0;
  double loss_total = 0.0, loss_agg = 0.0, loss_tp = 0.0, loss_kl = 0.0;
  double val_rmse = 0.0, val_mae = 0.0, val_mape = 0.0;
  double route_acc = 0.0;  // NaN when no ground truth is available
  double epsilon = 0.0;
  int records_skipped = 0;  // empty candidate sets this epoch
};

std::string log_header();
std::string log_row(const EpochLog& row);

// --- the three loss terms ----------------------------------------------------

// Negated Gaussian aggregate log-likelihood of the observed total:
// (T - Q(mu))^2 / (2 sum sigma^2) + 0.5 ln(2 pi sum sigma^2).
ad::Value loss_aggregate(const roadnet::RoadNetwork& net, const std::vector<int>& route_edges,
                         double T, const model::ForwardResult& fwd);

// Transition NLL of the selected route through the differentiable logits.
ad::Value loss_transition(const roadnet::RoadNetwork& net, const std::vector<int>& route_edges,
                          const model::ForwardResult& fwd);

// KL(P || Q) between the softmax of candidate scores (differentiable) and a
// constant target distribution softmax(target_scores). Both are column-wise.
ad::Value kl_between(const std::vector<ad::Value>& candidate_scores,
                     const std::vector<double>& target_scores);

// P = softmax over candidates of route log-probability; Q = softmax of
// -|T - route_mean_time| / temperature computed from the frozen snapshot.
ad::Value loss_kl(const roadnet::RoadNetwork& net, const route::CandidateSet& candidates,
                  double T, double temperature, const model::GaussianField& snapshot,
                  const model::ForwardResult& fwd);

// --- training loop ------------------------------------------------------------

struct TrainResult {
  std::vector<EpochLog> log;
  int epochs_run = 0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Alternates per epoch: frozen forward snapshot per context, candidate
// refresh per OD, then mini-batch epsilon-greedy selection and Adam updates
// on the weighted three-term loss. Deterministic for fixed (seed, epochs) at
// any worker count. start_epoch > 0 continues a resumed run.
TrainResult train(const roadnet::RoadNetwork& net, const Dataset& data,
                  const TrainingConfig& cfg, model::ModelParams& params, int workers = 1,
                  int start_epoch = 0, EpochCallback on_epoch = nullptr);

// --- inference -----------------------------------------------------------------

struct InferResult {
  double predicted_T = 0.0;
  route::Route route;
  std::vector<std::pair<std::string, double>> breakdown;  // "edge:<id>" / "node:<id>"
  bool fallback_shortest = false;
};

// Highest-probability candidate under the given snapshots; when pruning
// leaves no candidate the length-shortest route is used and flagged.
InferResult infer_from_snapshot(const roadnet::RoadNetwork& net,
                                const model::GaussianField& field,
                                const model::TransitionModel& A, int origin, int dest,
                                const TrainingConfig& search);

InferResult infer(const roadnet::RoadNetwork& net, model::ModelParams& params,
                  const sim::ODRecord& od, const TrainingConfig& search);

}  // namespace mwsl::train
