#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwsl/eval.hpp"
#include "mwsl/training.hpp"

// Subcommand implementations, separated from argument parsing so tests can
// drive the pipeline in-process.
namespace mwsl::cli {

constexpr const char* kToolVersion = "0.1.0";

struct GenArgs {
  int rows = 10;
  int cols = 10;
  int slots = 24;
  int trips_per_slot = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir;
};
// Writes network.json, oracle.csv, od_train_slot<K>.csv per slot,
// gt_routes.csv and manifest.json into out_dir.
void cmd_gen(const GenArgs& args);

struct TrainArgs {
  std::string data_dir;
  std::string config_path;  // empty -> defaults
  std::string out_dir;
  std::string resume_checkpoint;  // empty -> fresh start
  int workers = 1;
  bool quiet = false;
};
// Writes model.ckpt, model.meta.json, train_log.csv and manifest.json.
train::TrainResult cmd_train(const TrainArgs& args);

struct EvalArgs {
  std::string data_dir;
  std::string checkpoint;  // path to model.ckpt (sidecar found next to it)
  std::string out_dir;
  int workers = 1;
};
eval::EvalReport cmd_eval(const EvalArgs& args);

struct InferArgs {
  std::string data_dir;
  std::string checkpoint;
  int origin = -1;
  int dest = -1;
  int slot = 0;
  int weather = 0;
  int holiday = 0;
};
// Returns the result as JSON text.
std::string cmd_infer(const InferArgs& args);

struct ExportArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string out_path;  // CSV: edge_id,slot,state
};
void cmd_export_conditions(const ExportArgs& args);

struct VerifyOutcome {
  int passed = 0;
  int failed = 0;
  std::string table;
};
VerifyOutcome cmd_verify(const std::string& level, bool inject_grad_fault = false);

// Helpers shared with the acceptance suite.
struct LoadedData {
  roadnet::RoadNetwork net;
  std::uint64_t fingerprint = 0;
  train::Dataset dataset;
  sim::OracleField oracle;
  bool has_oracle = false;
  int slots = 0;
};
LoadedData load_data_dir(const std::string& data_dir, bool need_oracle);

struct CheckpointBundle {
  model::ModelParams params;
  train::TrainingConfig config;
  std::uint64_t fingerprint = 0;
  int epochs_completed = 0;
};
CheckpointBundle load_checkpoint_bundle(const roadnet::RoadNetwork& net,
                                        const std::string& checkpoint_path);

}  // namespace mwsl::cli
