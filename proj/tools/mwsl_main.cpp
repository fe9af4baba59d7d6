#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mwsl/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mwsl: weakly supervised origin-destination travel time estimation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int workers = 1;
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads (results are identical at any count)")
      ->capture_default_str();

  mwsl::cli::GenArgs gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic city and OD datasets");
  cmd_gen->fallthrough();
  cmd_gen->add_option("--rows", gen.rows, "grid rows")->capture_default_str();
  cmd_gen->add_option("--cols", gen.cols, "grid cols")->capture_default_str();
  cmd_gen->add_option("--slots", gen.slots, "time slots per day")->capture_default_str();
  cmd_gen->add_option("--trips", gen.trips_per_slot, "trips per slot")->capture_default_str();
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();

  mwsl::cli::TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "train on a generated dataset");
  cmd_train->fallthrough();
  cmd_train->add_option("--data", train.data_dir, "data directory from gen")->required();
  cmd_train->add_option("--config", train.config_path, "key=value training config file");
  cmd_train->add_option("--out", train.out_dir, "output directory")->required();
  cmd_train->add_option("--resume", train.resume_checkpoint, "checkpoint to continue from");
  cmd_train->add_flag("--quiet", train.quiet, "suppress per-epoch stdout");

  mwsl::cli::EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
  cmd_eval->fallthrough();
  cmd_eval->add_option("--data", eval.data_dir, "data directory")->required();
  cmd_eval->add_option("--checkpoint", eval.checkpoint, "model.ckpt path")->required();
  cmd_eval->add_option("--out", eval.out_dir, "report output directory")->required();

  mwsl::cli::InferArgs infer;
  auto* cmd_infer = app.add_subcommand("infer", "predict one OD travel time");
  cmd_infer->fallthrough();
  cmd_infer->add_option("--data", infer.data_dir, "data directory")->required();
  cmd_infer->add_option("--checkpoint", infer.checkpoint, "model.ckpt path")->required();
  cmd_infer->add_option("--origin", infer.origin, "origin segment id")->required();
  cmd_infer->add_option("--dest", infer.dest, "destination segment id")->required();
  cmd_infer->add_option("--slot", infer.slot, "time slot")->required();
  cmd_infer->add_option("--weather", infer.weather, "weather code 0..3")->capture_default_str();
  cmd_infer->add_option("--holiday", infer.holiday, "holiday code 0..1")->capture_default_str();

  mwsl::cli::ExportArgs exp;
  auto* cmd_export = app.add_subcommand("export-conditions", "export 4-state road conditions");
  cmd_export->fallthrough();
  cmd_export->add_option("--data", exp.data_dir, "data directory")->required();
  cmd_export->add_option("--checkpoint", exp.checkpoint, "model.ckpt path")->required();
  cmd_export->add_option("--out", exp.out_path, "output CSV path")->required();

  std::string verify_level = "quick";
  bool inject_fault = false;
  auto* cmd_verify = app.add_subcommand("verify", "run the built-in oracle suites");
  cmd_verify->fallthrough();
  cmd_verify->add_option("--level", verify_level, "quick or full")->capture_default_str();
  cmd_verify
      ->add_flag("--inject-grad-fault", inject_fault,
                 "corrupt one backward rule to prove the gradient oracle catches it")
      ->group("");  // harness hook, hidden from help

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_gen) {
      gen.seed = seed;
      gen.workers = workers;
      mwsl::cli::cmd_gen(gen);
      std::cout << "wrote dataset to " << gen.out_dir << std::endl;
    } else if (*cmd_train) {
      train.workers = workers;
      auto result = mwsl::cli::cmd_train(train);
      std::cout << "trained " << result.epochs_run << " epochs"
                << (result.early_stopped ? " (early stop)" : "") << ", checkpoint in "
                << train.out_dir << std::endl;
    } else if (*cmd_eval) {
      eval.workers = workers;
      auto report = mwsl::cli::cmd_eval(eval);
      std::cout << mwsl::eval::report_to_text(report);
    } else if (*cmd_infer) {
      std::cout << mwsl::cli::cmd_infer(infer);
    } else if (*cmd_export) {
      mwsl::cli::cmd_export_conditions(exp);
      std::cout << "wrote conditions to " << exp.out_path << std::endl;
    } else if (*cmd_verify) {
      auto outcome = mwsl::cli::cmd_verify(verify_level, inject_fault);
      std::cout << outcome.table;
      return outcome.failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
