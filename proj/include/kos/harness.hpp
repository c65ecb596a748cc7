#ifndef KOS_HARNESS_HPP
#define KOS_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "kos/attacks.hpp"
#include "kos/metrics.hpp"
#include "kos/nn.hpp"
#include "kos/train.hpp"

namespace kos {

enum class TargetPolicy { kSwapPair, kRandom };

struct ExperimentConfig {
  std::size_t n_trials = 20;
  std::uint64_t root_seed = 1;
  AttackConfig attack;
  std::vector<Method> methods = {Method::kBaseline, Method::kEot, Method::kKos, Method::kHsj};
  TargetPolicy target_policy = TargetPolicy::kSwapPair;
  std::string pair_first = "079.12";
  std::string pair_second = "100.00";
  std::filesystem::path out_dir = "kos_out";
  std::filesystem::path params_path;  // empty: <out_dir>/recognizer.kosn
  std::size_t jobs = 1;               // worker threads over trials
  bool dump_images = true;

  std::filesystem::path resolved_params_path() const;
  // Throws ConfigInvalid.
  void validate() const;
};

struct TrialRow {
  std::string method;
  std::size_t trial = 0;
  bool success = false;
  std::size_t l_full = 0;
  std::size_t l_crop = 0;
  double mse_full = 0.0;
  double time_s = 0.0;
  std::uint64_t h1_queries = 0;
  std::uint64_t h2_queries = 0;
  std::uint64_t gradient_calls = 0;
};

struct MethodSummary {
  std::string method;
  SummaryRow summary;
};

struct ExperimentReport {
  std::vector<TrialRow> rows;          // trial order, then method order
  std::vector<MethodSummary> summary;  // method order
  std::vector<std::size_t> skipped;    // trials the clean pipeline misread
};

using LogFn = std::function<void(std::string_view)>;

// Label and target for one trial under the configured policy.
std::pair<DigitString, DigitString> trial_strings(const ExperimentConfig& cfg, std::size_t trial);

// Runs every trial in memory; no files are touched.
ExperimentReport run_trials(const NetworkParams& params, const ExperimentConfig& cfg,
                            const LogFn& log = {});

// Loads params from path, or trains with options and saves them there when
// the file is absent. Either way the held-out gate must pass (GateFailed).
NetworkParams obtain_recognizer(const std::filesystem::path& path, const TrainOptions& options,
                                const LogFn& log = {});

// obtain_recognizer + run_trials, then writes trials.csv, summary.csv and,
// when enabled, PGM dumps under out_dir/images.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const LogFn& log = {});

std::vector<MethodSummary> summarize(const std::vector<TrialRow>& rows,
                                     const std::vector<Method>& methods);

inline constexpr std::string_view kTrialsHeader =
    "method,trial,success,l_full,l_crop,mse_full,time_s,h1_queries,h2_queries,gradient_calls";
inline constexpr std::string_view kSummaryHeader =
    "method,success_rate,mean_l_full,mean_l_crop,mean_mse,mean_time_s";

std::string emit_trials_csv(const std::vector<TrialRow>& rows);
std::string emit_summary_csv(const std::vector<MethodSummary>& rows);
// Throw ConfigInvalid on malformed text.
std::vector<TrialRow> parse_trials_csv(std::string_view text);
std::vector<MethodSummary> parse_summary_csv(std::string_view text);

// True when every summary value matches aggregate() over the rows of that
// method within tolerance.
bool summary_consistent(const std::vector<TrialRow>& rows,
                        const std::vector<MethodSummary>& summary, double tolerance = 1e-6);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace kos

#endif  // KOS_HARNESS_HPP
