// Acceptance suite: one pass/fail line per criterion, nonzero exit when a
// non-advisory criterion fails. The learning criteria share one trained run
// on a 10x10 synthetic city.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mwsl/eval.hpp"
#include "mwsl/pipeline.hpp"
#include "mwsl/verify.hpp"

namespace fs = std::filesystem;
using namespace mwsl;

namespace {

struct Criterion {
  std::string name;
  bool passed = false;
  bool advisory = false;
  std::string detail;
};

std::vector<Criterion> g_results;

void report(const std::string& name, bool passed, const std::string& detail,
            bool advisory = false) {
  g_results.push_back({name, passed, advisory, detail});
  const char* tag = passed ? "[PASS]" : (advisory ? "[WARN]" : "[FAIL]");
  std::printf("%s %-26s %s\n", tag, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  std::set<std::string> names_b;
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
  if (names != names_b) {
    why = "file lists differ";
    return false;
  }
  for (const auto& n : names)
    if (read_file(a / n) != read_file(b / n)) {
      why = n + " differs";
      return false;
    }
  return true;
}

// --- criteria without training ------------------------------------------------

void criterion_gradient_fidelity() {
  const auto start = std::chrono::steady_clock::now();
  auto r = verify::check_gradient_model(200);
  const double elapsed = seconds_since(start);
  std::ostringstream note;
  note << r.detail << ", " << elapsed << "s (<60s)";
  report("gradient-fidelity", r.passed && elapsed < 60.0, note.str());
}

void criterion_stochasticity() {
  auto r = verify::check_stochastic_rows(100);
  report("transition-stochasticity", r.passed, r.detail);
}

void criterion_route_enumeration() {
  auto r = verify::check_route_enumeration(20);
  report("route-enumeration-oracle", r.passed, r.detail);
}

void criterion_aggregation_law() {
  auto r = verify::check_aggregation_monte_carlo();
  report("aggregation-law", r.passed, r.detail);
}

void criterion_kl_properties() {
  auto r = verify::check_kl_properties(1000);
  report("kl-properties", r.passed, r.detail);
}

// Independent reimplementations of the metric formulas.
void criterion_metric_oracles() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> val(10.0, 500.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<double> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = val(rng);
      truth[i] = val(rng);
    }
    auto m = eval::tte_metrics(pred, truth);
    double se = 0, ae = 0, ape = 0;
    for (int i = 0; i < n; ++i) {
      se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
      ae += std::fabs(pred[i] - truth[i]);
      ape += std::fabs(pred[i] - truth[i]) / truth[i];
    }
    worst = std::max({worst, std::fabs(m.rmse - std::sqrt(se / n)),
                      std::fabs(m.mae - ae / n), std::fabs(m.mape - ape / n)});
  }

  // route accuracy versus a set-based recomputation on random mini networks
  double worst_acc = 0.0;
  for (int c = 0; c < 100; ++c) {
    auto net = verify::random_mini_network(7000 + c);
    std::vector<int> a, b;
    for (int e = 0; e < net.num_segments(); ++e) {
      if (rng() % 2) a.push_back(e);
      if (rng() % 2) b.push_back(e);
    }
    if (a.empty() || b.empty()) continue;
    std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    double la = 0, lb = 0, lboth = 0;
    for (int e : sa) la += net.segments[e].length_m;
    for (int e : sb) lb += net.segments[e].length_m;
    for (int e : sa)
      if (sb.count(e)) lboth += net.segments[e].length_m;
    const double expect = lboth / std::max(la, lb);
    worst_acc = std::max(worst_acc, std::fabs(eval::route_accuracy(net, a, b) - expect));
  }

  // worked example: {e1=100m, e2=200m} vs {e1=100m, e3=300m} -> 100/400
  roadnet::RoadNetwork net;
  for (int i = 0; i < 4; ++i)
    net.intersections.push_back({i, 34.0 + 0.001 * i, 108.0, roadnet::NodeTag::none, 1});
  auto seg = [&](int id, int u, int v, double len) {
    roadnet::RoadSegment s;
    s.id = id;
    s.from_node = u;
    s.to_node = v;
    s.length_m = len;
    s.speed_kph = 50;
    net.segments.push_back(s);
  };
  seg(0, 0, 1, 100.0);
  seg(1, 1, 2, 200.0);
  seg(2, 1, 3, 300.0);
  const double worked = eval::route_accuracy(net, {0, 1}, {0, 2});

  const bool ok = worst < 1e-12 && worst_acc < 1e-12 && worked == 0.25;
  std::ostringstream note;
  note << "tte max dev " << worst << ", acc max dev " << worst_acc << ", worked example "
       << worked << " (want 0.25)";
  report("metric-oracles", ok, note.str());
}

void criterion_determinism(const fs::path& scratch) {
  std::string why;
  bool ok = true;

  cli::GenArgs gen;
  gen.rows = 4;
  gen.cols = 4;
  gen.slots = 3;
  gen.trips_per_slot = 60;
  gen.seed = 11;
  gen.workers = 1;
  gen.out_dir = (scratch / "det_gen_a").string();
  cli::cmd_gen(gen);
  gen.workers = 2;
  gen.out_dir = (scratch / "det_gen_b").string();
  cli::cmd_gen(gen);
  ok = dirs_byte_identical(scratch / "det_gen_a", scratch / "det_gen_b", why);

  if (ok) {
    std::ofstream cfg(scratch / "det_cfg.txt");
    cfg << "epochs=2\nbatch_size=32\nseed=19\n";
    cfg.close();
    cli::TrainArgs train;
    train.data_dir = (scratch / "det_gen_a").string();
    train.config_path = (scratch / "det_cfg.txt").string();
    train.quiet = true;
    train.workers = 1;
    train.out_dir = (scratch / "det_train_a").string();
    cli::cmd_train(train);
    train.workers = 2;
    train.out_dir = (scratch / "det_train_b").string();
    cli::cmd_train(train);
    ok = dirs_byte_identical(scratch / "det_train_a", scratch / "det_train_b", why);
  }
  report("determinism", ok, ok ? "gen and train byte-identical at workers 1 vs 2" : why);
}

// --- the trained 10x10 run ------------------------------------------------------

struct BigRun {
  fs::path data_dir, train_dir, eval_dir;
  bool trained = false;
  double epoch0_mape = 0.0;
  double train_seconds = 0.0;
  eval::EvalReport final_report;
};

void make_peak_slot_dataset(const fs::path& dir, int trips) {
  fs::create_directories(dir);
  auto net = sim::generate_city(10, 10, 42);
  roadnet::save_network(net, (dir / "network.json").string());
  auto oracle = sim::assign_oracle(net, 24, 43);
  sim::save_oracle_csv((dir / "oracle.csv").string(), oracle);
  auto sample = sim::sample_trips(net, oracle, trips, 8, 44, 60.0, 2);
  sim::save_od_csv((dir / "od_train_slot8.csv").string(), sample.records, 0);
  sim::save_gt_csv((dir / "gt_routes.csv").string(), sample.truths);
}

BigRun run_learning(const fs::path& scratch) {
  BigRun run;
  run.data_dir = scratch / "city10_data";
  run.train_dir = scratch / "city10_train";
  run.eval_dir = scratch / "city10_eval";
  make_peak_slot_dataset(run.data_dir, 5000);

  std::ofstream cfg(scratch / "city10_cfg.txt");
  cfg << "alpha=0.8\nbeta=0.1\nepochs=50\nbatch_size=16\nseed=7\n";
  cfg.close();

  cli::TrainArgs train;
  train.data_dir = run.data_dir.string();
  train.config_path = (scratch / "city10_cfg.txt").string();
  train.out_dir = run.train_dir.string();
  train.quiet = true;
  train.workers = 1;  // the runtime budget is single-threaded

  const auto start = std::chrono::steady_clock::now();
  auto result = cli::cmd_train(train);
  run.train_seconds = seconds_since(start);
  run.epoch0_mape = result.log.front().val_mape;

  cli::EvalArgs ev;
  ev.data_dir = run.data_dir.string();
  ev.checkpoint = (run.train_dir / "model.ckpt").string();
  ev.out_dir = run.eval_dir.string();
  run.final_report = cli::cmd_eval(ev);
  run.trained = true;
  return run;
}

void criterion_learning(const BigRun& run) {
  // (a) validation MAPE improves >= 40% relative to epoch 0
  const double improvement = (run.epoch0_mape - run.final_report.mape) / run.epoch0_mape;
  std::ostringstream a_note;
  a_note << "val MAPE " << run.epoch0_mape << " -> " << run.final_report.mape << " ("
         << improvement * 100.0 << "% improvement, need >=40%)";
  report("learning-mape-improvement", improvement >= 0.40, a_note.str());

  // (b) recovered-route accuracy beats the length-shortest baseline by >= 5 pp
  auto data = cli::load_data_dir(run.data_dir.string(), false);
  std::vector<double> base_accs;
  for (size_t i = 0; i < data.dataset.records.size(); ++i) {
    if (train::in_train_split(data.dataset.record_index[i], 0.8)) continue;
    auto gt = data.dataset.gt_routes.find(data.dataset.record_index[i]);
    if (gt == data.dataset.gt_routes.end()) continue;
    const auto& rec = data.dataset.records[i];
    auto base = route::shortest_path(data.net, rec.origin_edge, rec.dest_edge);
    base_accs.push_back(eval::route_accuracy(data.net, gt->second, base.edges));
  }
  double baseline = 0.0;
  for (double a : base_accs) baseline += a;
  baseline /= static_cast<double>(base_accs.size());
  std::ostringstream b_note;
  b_note << "model " << run.final_report.route_accuracy * 100.0 << "% vs shortest-path baseline "
         << baseline * 100.0 << "% (need +5pp)";
  report("learning-route-recovery", run.final_report.route_accuracy >= baseline + 0.05,
         b_note.str());

  // (c) per-edge mu MAPE vs oracle on edges traversed >= 20 times
  std::ostringstream c_note;
  c_note << "field MAPE " << run.final_report.field_mape_frequent * 100.0
         << "% on frequent edges (need <=30%)";
  report("learning-field-recovery", run.final_report.field_mape_frequent <= 0.30, c_note.str());

  std::ostringstream t_note;
  t_note << run.train_seconds << "s single-threaded (budget 1800s)";
  report("learning-runtime", run.train_seconds < 1800.0, t_note.str());
}

void criterion_candidate_coverage(const BigRun& run) {
  auto data = cli::load_data_dir(run.data_dir.string(), false);
  auto bundle = cli::load_checkpoint_bundle(data.net, (run.train_dir / "model.ckpt").string());
  const auto& rec0 = data.dataset.records.front();
  auto fwd = model::model_forward(data.net, bundle.params,
                                  model::Context{rec0.slot, rec0.weather_code, rec0.holiday_code});
  auto A = fwd.transition();

  long covered = 0, total = 0;
  for (size_t i = 0; i < data.dataset.records.size(); ++i) {
    const auto& rec = data.dataset.records[i];
    const auto gt = data.dataset.gt_routes.find(data.dataset.record_index[i]);
    if (gt == data.dataset.gt_routes.end()) continue;
    const double sl = route::shortest_length(data.net, rec.origin_edge, rec.dest_edge);
    auto cands = route::enumerate_candidates(data.net, A, rec.origin_edge, rec.dest_edge,
                                             0.5 * sl, 1e-4, 8);
    ++total;
    for (const auto& r : cands.routes)
      if (r.edges == gt->second) {
        ++covered;
        break;
      }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);
  std::ostringstream note;
  note << coverage * 100.0 << "% of " << total
       << " trips have their true route in the candidate set (target 90%, floor 85%)";
  report("candidate-coverage", coverage >= 0.85, note.str());
}

void criterion_condition_agreement(const BigRun& run) {
  const auto it = run.final_report.condition_agreement_per_slot.find(8);
  const double agreement =
      it != run.final_report.condition_agreement_per_slot.end() ? it->second : 0.0;
  std::ostringstream note;
  note << agreement * 100.0 << "% at the peak slot (reference level 70%; advisory)";
  report("condition-agreement", agreement >= 0.70, note.str(), /*advisory=*/true);
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--only") only = argv[i + 1];
  auto wanted = [&](const char* name) {
    return only.empty() || std::string(name).find(only) != std::string::npos;
  };

  fs::path scratch = fs::temp_directory_path() / "mwsl_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  try {
    if (wanted("gradient-fidelity")) criterion_gradient_fidelity();
    if (wanted("transition-stochasticity")) criterion_stochasticity();
    if (wanted("route-enumeration-oracle")) criterion_route_enumeration();
    if (wanted("aggregation-law")) criterion_aggregation_law();
    if (wanted("kl-properties")) criterion_kl_properties();
    if (wanted("metric-oracles")) criterion_metric_oracles();
    if (wanted("determinism")) criterion_determinism(scratch);
    if (wanted("learning") || wanted("candidate-coverage") || wanted("condition-agreement")) {
      auto run = run_learning(scratch);
      criterion_learning(run);
      criterion_candidate_coverage(run);
      criterion_condition_agreement(run);
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] %-26s unhandled error: %s\n", "harness", e.what());
    g_results.push_back({"harness", false, false, e.what()});
  }

  int hard_failures = 0;
  for (const auto& r : g_results)
    if (!r.passed && !r.advisory) ++hard_failures;
  std::printf("%zu criteria, %d hard failure(s)\n", g_results.size(), hard_failures);
  return hard_failures == 0 ? 0 : 1;
}
