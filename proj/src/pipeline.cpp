#include "mwsl/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mwsl/errors.hpp"
#include "mwsl/fingerprint.hpp"
#include "mwsl/verify.hpp"

namespace mwsl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_manifest(const fs::path& path, json manifest) {
  manifest["format"] = "mwsl-manifest-1";
  manifest["tool_version"] = kToolVersion;
  write_text_file(path, manifest.dump(2) + "\n");
}

json model_config_to_json(const model::ModelConfig& c) {
  json j;
  j["d_id_edge"] = c.d_id_edge;
  j["d_road_type"] = c.d_road_type;
  j["d_lanes"] = c.d_lanes;
  j["d_one_way"] = c.d_one_way;
  j["d_id_node"] = c.d_id_node;
  j["d_node_tag"] = c.d_node_tag;
  j["d_street_count"] = c.d_street_count;
  j["d_weather"] = c.d_weather;
  j["d_holiday"] = c.d_holiday;
  j["d_hidden"] = c.d_hidden;
  j["d_out"] = c.d_out;
  j["layers"] = c.layers;
  j["slots"] = c.slots;
  j["max_lanes"] = c.max_lanes;
  j["max_street_count"] = c.max_street_count;
  j["node_time_scale"] = c.node_time_scale;
  j["sigma_floor"] = c.sigma_floor;
  return j;
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  c.d_id_edge = j.at("d_id_edge").get<int>();
  c.d_road_type = j.at("d_road_type").get<int>();
  c.d_lanes = j.at("d_lanes").get<int>();
  c.d_one_way = j.at("d_one_way").get<int>();
  c.d_id_node = j.at("d_id_node").get<int>();
  c.d_node_tag = j.at("d_node_tag").get<int>();
  c.d_street_count = j.at("d_street_count").get<int>();
  c.d_weather = j.at("d_weather").get<int>();
  c.d_holiday = j.at("d_holiday").get<int>();
  c.d_hidden = j.at("d_hidden").get<int>();
  c.d_out = j.at("d_out").get<int>();
  c.layers = j.at("layers").get<int>();
  c.slots = j.at("slots").get<int>();
  c.max_lanes = j.at("max_lanes").get<int>();
  c.max_street_count = j.at("max_street_count").get<int>();
  c.node_time_scale = j.at("node_time_scale").get<double>();
  c.sigma_floor = j.at("sigma_floor").get<double>();
  return c;
}

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".meta.json");
  return p;
}

model::GaussianField oracle_slice(const sim::OracleField& oracle, int slot) {
  model::GaussianField f;
  f.mu_e = oracle.mu_e.col(slot);
  f.sigma_e = oracle.sigma_e.col(slot);
  f.mu_v = oracle.mu_v.col(slot);
  f.sigma_v = oracle.sigma_v.col(slot);
  return f;
}

struct ContextKey {
  int slot, weather, holiday;
  bool operator<(const ContextKey& o) const {
    if (slot != o.slot) return slot < o.slot;
    if (weather != o.weather) return weather < o.weather;
    return holiday < o.holiday;
  }
};

}  // namespace

// --- gen ----------------------------------------------------------------------

void cmd_gen(const GenArgs& args) {
  if (args.out_dir.empty()) throw std::invalid_argument("gen: --out directory required");
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  auto net = sim::generate_city(args.rows, args.cols, args.seed);
  roadnet::save_network(net, (out / "network.json").string());
  const std::uint64_t fp = fingerprint_file((out / "network.json").string());

  auto oracle = sim::assign_oracle(net, args.slots, sim::splitmix64(args.seed ^ 0x0a11ull));
  sim::save_oracle_csv((out / "oracle.csv").string(), oracle);

  std::vector<std::string> outputs = {"network.json", "oracle.csv"};
  std::ofstream gt_out(out / "gt_routes.csv", std::ios::binary);
  if (!gt_out) throw std::runtime_error("cannot write gt_routes.csv");
  bool first = true;
  for (int slot = 0; slot < args.slots; ++slot) {
    auto trips = sim::sample_trips(net, oracle, args.trips_per_slot, slot,
                                   sim::splitmix64(args.seed + 0x517bull * (slot + 1)), 60.0,
                                   args.workers);
    const long base = static_cast<long>(slot) * args.trips_per_slot;
    const std::string name = "od_train_slot" + std::to_string(slot) + ".csv";
    sim::save_od_csv((out / name).string(), trips.records, base);
    sim::append_gt_csv(gt_out, trips.truths, base, first);
    first = false;
    outputs.push_back(name);
  }
  gt_out.close();
  outputs.push_back("gt_routes.csv");

  json manifest;
  manifest["subcommand"] = "gen";
  manifest["seed"] = args.seed;
  manifest["params"] = {{"rows", args.rows},
                        {"cols", args.cols},
                        {"slots", args.slots},
                        {"trips_per_slot", args.trips_per_slot}};
  manifest["outputs"] = outputs;
  manifest["network_fingerprint"] = fingerprint_hex(fp);
  write_manifest(out / "manifest.json", manifest);
}

// --- shared loading -------------------------------------------------------------

LoadedData load_data_dir(const std::string& data_dir, bool need_oracle) {
  const fs::path dir(data_dir);
  LoadedData data;
  data.net = roadnet::load_network((dir / "network.json").string());
  data.fingerprint = fingerprint_file((dir / "network.json").string());

  std::vector<std::pair<int, fs::path>> od_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("od_train_slot", 0) == 0 && name.size() > 17 &&
        name.substr(name.size() - 4) == ".csv")
      od_files.emplace_back(std::stoi(name.substr(13, name.size() - 17)), entry.path());
  }
  std::sort(od_files.begin(), od_files.end());
  for (const auto& [slot, od] : od_files) {
    auto loaded = sim::load_od_csv(od.string());
    data.dataset.record_index.insert(data.dataset.record_index.end(), loaded.record_index.begin(),
                                     loaded.record_index.end());
    data.dataset.records.insert(data.dataset.records.end(), loaded.records.begin(),
                                loaded.records.end());
  }
  if (data.dataset.records.empty())
    throw ParseError("no od_train_slot<K>.csv files found in " + data_dir);

  if (fs::exists(dir / "gt_routes.csv")) {
    for (auto& gt : sim::load_gt_csv((dir / "gt_routes.csv").string()))
      data.dataset.gt_routes[gt.record_index] = std::move(gt.route_edges);
  }

  if (fs::exists(dir / "oracle.csv")) {
    data.oracle = sim::load_oracle_csv((dir / "oracle.csv").string(), data.net);
    data.has_oracle = true;
  } else if (need_oracle) {
    throw ParseError("oracle.csv required but missing in " + data_dir);
  }

  data.slots = 0;
  if (fs::exists(dir / "manifest.json")) {
    try {
      auto manifest = json::parse(read_text_file(dir / "manifest.json"));
      data.slots = manifest.at("params").at("slots").get<int>();
    } catch (const json::exception&) {
      data.slots = 0;
    }
  }
  if (data.slots == 0 && data.has_oracle) data.slots = data.oracle.slots;
  if (data.slots == 0) {
    for (const auto& r : data.dataset.records) data.slots = std::max(data.slots, r.slot + 1);
  }
  return data;
}

CheckpointBundle load_checkpoint_bundle(const roadnet::RoadNetwork& net,
                                        const std::string& checkpoint_path) {
  const fs::path meta_path = sidecar_path(checkpoint_path);
  json meta;
  try {
    meta = json::parse(read_text_file(meta_path));
  } catch (const json::exception& e) {
    throw ParseError("cannot parse checkpoint sidecar " + meta_path.string() + ": " + e.what());
  }
  CheckpointBundle bundle{
      model::ModelParams{}, train::TrainingConfig::from_text(meta.at("train").at("config").get<std::string>()),
      0, 0};
  const model::ModelConfig mc = model_config_from_json(meta.at("model"));
  bundle.params = model::init_params(net, mc, bundle.config.seed);
  ad::load_checkpoint(bundle.params.store, checkpoint_path);
  bundle.fingerprint = std::stoull(meta.at("network_fingerprint").get<std::string>(), nullptr, 16);
  bundle.epochs_completed = meta.at("train").at("epochs_completed").get<int>();
  return bundle;
}

// --- train ----------------------------------------------------------------------

train::TrainResult cmd_train(const TrainArgs& args) {
  if (args.out_dir.empty()) throw std::invalid_argument("train: --out directory required");
  train::TrainingConfig cfg =
      args.config_path.empty() ? train::TrainingConfig{} : train::TrainingConfig::from_file(args.config_path);

  LoadedData data = load_data_dir(args.data_dir, false);
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  model::ModelParams params;
  int start_epoch = 0;
  if (!args.resume_checkpoint.empty()) {
    auto bundle = load_checkpoint_bundle(data.net, args.resume_checkpoint);
    if (bundle.fingerprint != data.fingerprint)
      throw ValidationError("resume checkpoint fingerprint " + fingerprint_hex(bundle.fingerprint) +
                            " does not match network " + fingerprint_hex(data.fingerprint));
    params = std::move(bundle.params);
    start_epoch = bundle.epochs_completed;
  } else {
    model::ModelConfig mc;
    mc.slots = data.slots;
    params = model::init_params(data.net, mc, cfg.seed);
  }

  std::ofstream log(out / "train_log.csv", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write train_log.csv");
  log << train::log_header() << "\n";
  auto on_epoch = [&](const train::EpochLog& row) {
    log << train::log_row(row) << "\n";
    log.flush();
    if (!args.quiet) std::cout << train::log_row(row) << std::endl;
  };

  auto result = train::train(data.net, data.dataset, cfg, params, args.workers, start_epoch, on_epoch);

  ad::save_checkpoint(params.store, (out / "model.ckpt").string());
  json meta;
  meta["format"] = "mwsl-meta-1";
  meta["model"] = model_config_to_json(params.cfg);
  meta["relations"] = roadnet::kNumRelations;
  meta["network_fingerprint"] = fingerprint_hex(data.fingerprint);
  meta["train"] = {{"epochs_completed", result.epochs_run},
                   {"early_stopped", result.early_stopped},
                   {"config", cfg.to_text()}};
  write_text_file(out / "model.meta.json", meta.dump(2) + "\n");

  json manifest;
  manifest["subcommand"] = "train";
  manifest["seed"] = cfg.seed;
  manifest["inputs"] = {{"data_dir", args.data_dir},
                        {"config", args.config_path},
                        {"resume", args.resume_checkpoint}};
  manifest["outputs"] = {"model.ckpt", "model.meta.json", "train_log.csv"};
  manifest["config"] = cfg.to_text();
  manifest["network_fingerprint"] = fingerprint_hex(data.fingerprint);
  write_manifest(out / "manifest.json", manifest);
  return result;
}

// --- eval ------------------------------------------------------------------------

eval::EvalReport cmd_eval(const EvalArgs& args) {
  LoadedData data = load_data_dir(args.data_dir, true);
  auto bundle = load_checkpoint_bundle(data.net, args.checkpoint);
  if (bundle.fingerprint != data.fingerprint)
    throw ValidationError("checkpoint network fingerprint " + fingerprint_hex(bundle.fingerprint) +
                          " does not match data fingerprint " + fingerprint_hex(data.fingerprint) +
                          "; refusing to evaluate");
  const train::TrainingConfig& cfg = bundle.config;

  std::set<ContextKey> contexts;
  for (const auto& r : data.dataset.records)
    contexts.insert({r.slot, r.weather_code, r.holiday_code});
  const model::ModelGraph graph = model::build_model_graph(data.net);
  std::map<ContextKey, model::GaussianField> fields;
  std::map<ContextKey, model::TransitionModel> transitions;
  for (const auto& key : contexts) {
    auto fwd = model::model_forward(data.net, graph, bundle.params,
                                    model::Context{key.slot, key.weather, key.holiday});
    fields[key] = fwd.field();
    transitions[key] = fwd.transition();
  }

  eval::EvalReport report;
  std::vector<double> pred, truth, accs;
  std::vector<sim::TripGroundTruth> recovered;  // diffable against gt_routes.csv
  for (size_t i = 0; i < data.dataset.records.size(); ++i) {
    if (train::in_train_split(data.dataset.record_index[i], cfg.train_fraction)) continue;
    const auto& rec = data.dataset.records[i];
    const ContextKey key{rec.slot, rec.weather_code, rec.holiday_code};
    auto inferred = train::infer_from_snapshot(data.net, fields.at(key), transitions.at(key),
                                               rec.origin_edge, rec.dest_edge, cfg);
    pred.push_back(inferred.predicted_T);
    truth.push_back(rec.observed_T);
    recovered.push_back({static_cast<int>(data.dataset.record_index[i]), inferred.route.edges});
    if (inferred.fallback_shortest) ++report.n_fallback;
    auto gt = data.dataset.gt_routes.find(data.dataset.record_index[i]);
    if (gt != data.dataset.gt_routes.end())
      accs.push_back(eval::route_accuracy(data.net, gt->second, inferred.route.edges));
  }
  report.n_validation = static_cast<int>(pred.size());
  if (!pred.empty()) {
    auto m = eval::tte_metrics(pred, truth);
    report.rmse = m.rmse;
    report.mae = m.mae;
    report.mape = m.mape;
  }
  report.route_accuracy =
      accs.empty() ? 0.0 : std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();

  // traversal counts over the full dataset's ground-truth routes
  std::map<int, long> traversals;
  for (const auto& [idx, edges] : data.dataset.gt_routes)
    for (int e : edges) ++traversals[e];

  std::vector<double> field_ape;
  std::set<int> slots_present;
  for (const auto& r : data.dataset.records) slots_present.insert(r.slot);
  for (int slot : slots_present) {
    // representative context of this slot
    ContextKey key{slot, 0, 0};
    for (const auto& k : contexts)
      if (k.slot == slot) {
        key = k;
        break;
      }
    const auto& field = fields.at(key);
    for (const auto& [e, count] : traversals) {
      if (count < 20) continue;
      const double star = data.oracle.mu_e(e, slot);
      if (star > 0.0) field_ape.push_back(std::abs(field.mu_e[e] - star) / star);
    }
    const double agreement = eval::condition_agreement(
        eval::condition_map(data.net, field), eval::condition_map(data.net, oracle_slice(data.oracle, slot)));
    report.condition_agreement_per_slot[slot] = agreement;
  }
  report.field_mape_frequent =
      field_ape.empty() ? 0.0
                        : std::accumulate(field_ape.begin(), field_ape.end(), 0.0) / field_ape.size();

  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_text_file(out / "report.json", eval::report_to_json(report));
    write_text_file(out / "report.txt", eval::report_to_text(report));
    sim::save_gt_csv((out / "recovered_routes.csv").string(), recovered);
    json manifest;
    manifest["subcommand"] = "eval";
    manifest["seed"] = cfg.seed;
    manifest["inputs"] = {{"data_dir", args.data_dir}, {"checkpoint", args.checkpoint}};
    manifest["outputs"] = {"report.json", "report.txt", "recovered_routes.csv"};
    manifest["network_fingerprint"] = fingerprint_hex(data.fingerprint);
    write_manifest(out / "manifest.json", manifest);
  }
  return report;
}

// --- infer -----------------------------------------------------------------------

std::string cmd_infer(const InferArgs& args) {
  LoadedData data = load_data_dir(args.data_dir, false);
  auto bundle = load_checkpoint_bundle(data.net, args.checkpoint);
  if (bundle.fingerprint != data.fingerprint)
    throw ValidationError("checkpoint network fingerprint does not match data; refusing to infer");
  if (args.origin < 0 || args.origin >= data.net.num_segments() || args.dest < 0 ||
      args.dest >= data.net.num_segments())
    throw std::invalid_argument("infer: origin/dest segment id out of range");
  if (args.origin == args.dest)
    throw std::invalid_argument("infer: origin and destination segments must differ");

  sim::ODRecord od;
  od.origin_edge = args.origin;
  od.dest_edge = args.dest;
  od.slot = args.slot;
  od.weather_code = args.weather;
  od.holiday_code = args.holiday;
  auto result = train::infer(data.net, bundle.params, od, bundle.config);

  json j;
  j["predicted_T"] = result.predicted_T;
  j["route"] = result.route.edges;
  j["fallback_shortest"] = result.fallback_shortest;
  j["breakdown"] = json::array();
  for (const auto& [component, mu] : result.breakdown)
    j["breakdown"].push_back({{"component", component}, {"mu", mu}});
  return j.dump(2) + "\n";
}

// --- export-conditions --------------------------------------------------------------

void cmd_export_conditions(const ExportArgs& args) {
  LoadedData data = load_data_dir(args.data_dir, false);
  auto bundle = load_checkpoint_bundle(data.net, args.checkpoint);
  if (bundle.fingerprint != data.fingerprint)
    throw ValidationError("checkpoint network fingerprint does not match data; refusing to export");

  // per-slot context codes come from the data when present
  std::map<int, std::pair<int, int>> slot_context;
  for (const auto& r : data.dataset.records)
    slot_context.emplace(r.slot, std::make_pair(r.weather_code, r.holiday_code));

  const model::ModelGraph graph = model::build_model_graph(data.net);
  std::ofstream out(args.out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + args.out_path);
  out << "edge_id,slot,state\n";
  for (int slot = 0; slot < bundle.params.cfg.slots; ++slot) {
    auto ctx_it = slot_context.find(slot);
    const int weather = ctx_it != slot_context.end() ? ctx_it->second.first : 0;
    const int holiday = ctx_it != slot_context.end() ? ctx_it->second.second : 0;
    auto fwd = model::model_forward(data.net, graph, bundle.params,
                                    model::Context{slot, weather, holiday});
    auto states = eval::condition_map(data.net, fwd.field());
    for (int e = 0; e < data.net.num_segments(); ++e)
      out << e << ',' << slot << ',' << eval::to_string(states[e]) << '\n';
  }
  out.close();

  json manifest;
  manifest["subcommand"] = "export-conditions";
  manifest["seed"] = bundle.config.seed;
  manifest["inputs"] = {{"data_dir", args.data_dir}, {"checkpoint", args.checkpoint}};
  manifest["outputs"] = {fs::path(args.out_path).filename().string()};
  manifest["network_fingerprint"] = fingerprint_hex(data.fingerprint);
  write_manifest(args.out_path + ".manifest.json", manifest);
}

// --- verify ---------------------------------------------------------------------------

VerifyOutcome cmd_verify(const std::string& level, bool inject_grad_fault) {
  if (level != "quick" && level != "full")
    throw std::invalid_argument("verify: level must be quick or full");
  ad::set_gradient_fault_injection(inject_grad_fault);
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suites(level == "full");
  } catch (...) {
    ad::set_gradient_fault_injection(false);
    throw;
  }
  ad::set_gradient_fault_injection(false);

  VerifyOutcome outcome;
  std::ostringstream table;
  for (const auto& r : results) {
    table << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
    for (size_t pad = r.name.size(); pad < 28; ++pad) table << ' ';
    table << ' ' << r.detail << "\n";
    if (r.passed)
      ++outcome.passed;
    else
      ++outcome.failed;
  }
  table << outcome.passed << " passed, " << outcome.failed << " failed\n";
  outcome.table = table.str();
  return outcome;
}

}  // namespace mwsl::cli
