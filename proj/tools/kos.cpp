// Command-line front end: train, attack, selftest.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kos/errors.hpp"
#include "kos/harness.hpp"
#include "kos/selftest.hpp"
#include "kos/train.hpp"

namespace {

void log_line(std::string_view text) { std::cerr << text << '\n'; }

// Flat key=value file; keys are long option names without dashes. Values on
// the command line win.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kos::IOFailure("cannot open config file " + path);
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "config") continue;
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw kos::ConfigInvalid("unknown config key '" + item.name + "'");
    if (opt->count() == 0) {
      opt->add_result(item.inputs);
      opt->run_callback();
    }
  }
}

std::vector<kos::Method> parse_methods(const std::string& name) {
  if (name == "all") {
    return {kos::Method::kBaseline, kos::Method::kEot, kos::Method::kKos, kos::Method::kHsj};
  }
  return {kos::parse_method(name)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keep-on-Swimming attack laboratory"};
  app.require_subcommand(1);

  kos::TrainOptions train_opts;
  std::string train_out = "recognizer.kosn";
  std::string train_config;
  CLI::App* train_cmd = app.add_subcommand("train", "train the recognizer and check the gate");
  train_cmd->add_option("--seed", train_opts.seed);
  train_cmd->add_option("--epochs", train_opts.epochs);
  train_cmd->add_option("--lr", train_opts.learning_rate);
  train_cmd->add_option("--out", train_out);
  train_cmd->add_option("--config", train_config);

  kos::ExperimentConfig exp;
  std::string method = "all";
  std::string out_dir = exp.out_dir.string();
  std::string params_path;
  std::string attack_config;
  bool no_images = false;
  CLI::App* attack_cmd = app.add_subcommand("attack", "run the attack experiment");
  attack_cmd->add_option("--method", method)
      ->check(CLI::IsMember({"baseline", "eot", "kos", "hsj", "all"}));
  attack_cmd->add_option("--trials", exp.n_trials);
  attack_cmd->add_option("--seed", exp.root_seed);
  attack_cmd->add_option("--epsilon", exp.attack.epsilon);
  attack_cmd->add_option("--step", exp.attack.step_size);
  attack_cmd->add_option("--k", exp.attack.k);
  attack_cmd->add_option("--max-iters", exp.attack.max_iterations);
  attack_cmd->add_option("--max-restarts", exp.attack.max_restarts);
  attack_cmd->add_option("--eot-crops", exp.attack.eot_crops);
  attack_cmd->add_option("--eot-margin", exp.attack.eot_margin);
  attack_cmd->add_option("--hsj-queries", exp.attack.hsj_queries);
  attack_cmd->add_option("--out", out_dir);
  attack_cmd->add_option("--params", params_path);
  attack_cmd->add_option("--jobs", exp.jobs, "worker threads over trials");
  attack_cmd->add_flag("--no-images", no_images, "skip PGM dumps");
  attack_cmd->add_option("--config", attack_config);

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run oracle and property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) {
      if (!train_config.empty()) apply_config_file(*train_cmd, train_config);
      const auto set = kos::make_training_set(train_opts.train_samples, train_opts.seed);
      const kos::NetworkParams params =
          kos::train(set, train_opts, nullptr, [](std::size_t epoch, double loss) {
            std::fprintf(stderr, "epoch %zu mean loss %.6f\n", epoch, loss);
          });
      kos::save_params(params, train_out);
      const double accuracy = kos::held_out_accuracy(params, train_opts.seed);
      std::printf("held-out accuracy %.4f (gate %.2f)\n", accuracy, kos::kAccuracyGate);
      if (accuracy < kos::kAccuracyGate) throw kos::GateFailed("accuracy gate not met");
      return 0;
    }
    if (attack_cmd->parsed()) {
      if (!attack_config.empty()) apply_config_file(*attack_cmd, attack_config);
      exp.methods = parse_methods(method);
      exp.out_dir = out_dir;
      exp.params_path = params_path;
      exp.dump_images = !no_images;
      const kos::ExperimentReport report = kos::run_experiment(exp, log_line);
      std::cout << kos::emit_summary_csv(report.summary);
      return 0;
    }
    if (selftest_cmd->parsed()) {
      bool all = true;
      for (const auto& check : kos::run_selftest()) {
        std::printf("%s %s%s%s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.empty() ? "" : ": ", check.detail.c_str());
        all = all && check.passed;
      }
      return all ? 0 : 1;
    }
  } catch (const kos::IOFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const kos::KosError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
