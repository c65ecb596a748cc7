#include "kos/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "kos/errors.hpp"
#include "kos/glyphs.hpp"
#include "kos/pipeline.hpp"
#include "kos/rng.hpp"

namespace kos {

namespace {

void say(const LogFn& log, const std::string& text) {
  if (log) log(text);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string_view> data_lines(std::string_view text, std::string_view header) {
  std::vector<std::string_view> lines;
  for (std::string_view line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines.front() != header) throw ConfigInvalid("unexpected CSV header");
  lines.erase(lines.begin());
  return lines;
}

template <typename T>
T parse_number(std::string_view field) {
  T value{};
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size()) {
    throw ConfigInvalid("bad CSV field '" + std::string(field) + "'");
  }
  return value;
}

// Result of one attack method on one trial, or a failure record when the
// method could not start (HopSkipJump without a valid initialization).
AttackOutcome run_method(Method method, const std::shared_ptr<const NetworkParams>& params,
                         const Image& doc, const DigitString& target, AttackConfig cfg,
                         std::uint64_t trial_seed) {
  cfg.seed = splitmix64(trial_seed) + static_cast<std::uint64_t>(method);
  PipelineHandle handle(params);
  switch (method) {
    case Method::kBaseline: return baseline_reinsert_attack(handle, doc, target, cfg);
    case Method::kEot: return eot_crop_robust_attack(handle, doc, target, cfg);
    case Method::kKos: return kos_attack(handle, doc, target, cfg);
    case Method::kHsj: break;
  }
  try {
    const Image init = target_sample_init(handle, target, splitmix64(cfg.seed));
    return hop_skip_jump(handle, doc, target, init, cfg);
  } catch (const InvalidInitialization&) {
    AttackOutcome out;
    out.adversarial_doc = doc;
    auto probe = handle.fresh();
    const RegionSpec region = probe->detect_region(doc);
    out.attacked_crop = crop(doc, region);
    out.final_full_pred = probe->run_pipeline(doc).prediction.str();
    out.final_crop_pred = out.final_full_pred;
    out.metrics.l_full = levenshtein(target.str(), out.final_full_pred);
    out.metrics.l_crop = out.metrics.l_full;
    return out;
  }
}

TrialRow to_row(Method method, std::size_t trial, const AttackOutcome& o) {
  return {std::string(method_name(method)),
          trial,
          o.success,
          o.metrics.l_full,
          o.metrics.l_crop,
          o.metrics.mse_full,
          o.elapsed_seconds,
          o.h1_queries,
          o.h2_queries,
          o.gradient_calls};
}

struct TrialResult {
  bool skipped = false;
  Image original;
  std::vector<AttackOutcome> outcomes;
};

}  // namespace

std::filesystem::path ExperimentConfig::resolved_params_path() const {
  return params_path.empty() ? out_dir / "recognizer.kosn" : params_path;
}

void ExperimentConfig::validate() const {
  if (n_trials < 1) throw ConfigInvalid("at least one trial is required");
  if (methods.empty()) throw ConfigInvalid("no attack method selected");
  if (jobs < 1) throw ConfigInvalid("jobs must be at least 1");
  attack.validate();
  if (target_policy == TargetPolicy::kSwapPair) {
    const DigitString a(pair_first);
    const DigitString b(pair_second);
    if (a == b) throw ConfigInvalid("target pair members must differ");
  }
}

std::pair<DigitString, DigitString> trial_strings(const ExperimentConfig& cfg, std::size_t trial) {
  const std::uint64_t seed = cfg.root_seed + trial;
  if (cfg.target_policy == TargetPolicy::kSwapPair) {
    DigitString a(cfg.pair_first);
    DigitString b(cfg.pair_second);
    if (trial % 2 == 0) return {a, b};
    return {b, a};
  }
  const DigitString label = random_label(seed);
  for (std::uint64_t k = 1;; ++k) {
    DigitString target = random_label(splitmix64(seed) + k);
    if (target != label) return {label, target};
  }
}

namespace {

ExperimentReport execute(const NetworkParams& params, const ExperimentConfig& cfg,
                         const LogFn& log, std::vector<TrialResult>* keep) {
  cfg.validate();
  const auto shared = std::make_shared<const NetworkParams>(params);
  std::vector<TrialResult> results(cfg.n_trials);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.n_trials; i = next++) {
      const std::uint64_t seed = cfg.root_seed + i;
      const auto [label, target] = trial_strings(cfg, i);
      const DocumentSample sample = render_document(label, seed);
      PipelineHandle clean(shared);
      TrialResult& r = results[i];
      r.original = sample.full_image;
      if (clean.run_pipeline(sample.full_image).prediction != label) {
        r.skipped = true;
        continue;
      }
      for (Method m : cfg.methods) {
        r.outcomes.push_back(run_method(m, shared, sample.full_image, target, cfg.attack, seed));
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < cfg.jobs; ++t) pool.emplace_back(worker);
    worker();
  }

  ExperimentReport report;
  for (std::size_t i = 0; i < cfg.n_trials; ++i) {
    const TrialResult& r = results[i];
    if (r.skipped) {
      report.skipped.push_back(i);
      say(log, "trial " + std::to_string(i) + ": clean pipeline misread, skipped");
      continue;
    }
    std::string line = "trial " + std::to_string(i) + ":";
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      report.rows.push_back(to_row(cfg.methods[m], i, r.outcomes[m]));
      line += " " + std::string(method_name(cfg.methods[m])) + "=" +
              (r.outcomes[m].success ? "ok" : "fail");
    }
    say(log, line);
  }
  report.summary = summarize(report.rows, cfg.methods);
  if (keep) *keep = std::move(results);
  return report;
}

}  // namespace

ExperimentReport run_trials(const NetworkParams& params, const ExperimentConfig& cfg,
                            const LogFn& log) {
  return execute(params, cfg, log, nullptr);
}

NetworkParams obtain_recognizer(const std::filesystem::path& path, const TrainOptions& options,
                                const LogFn& log) {
  NetworkParams params = NetworkParams::zeros();
  if (std::filesystem::exists(path)) {
    params = load_params(path);
    say(log, "loaded recognizer from " + path.string());
  } else {
    say(log, "no recognizer at " + path.string() + ", training");
    const auto set = make_training_set(options.train_samples, options.seed);
    params = train(set, options, nullptr, [&](std::size_t epoch, double loss) {
      say(log, "epoch " + std::to_string(epoch) + " mean loss " + fixed6(loss));
    });
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    save_params(params, path);
  }
  const double accuracy = held_out_accuracy(params, options.seed);
  say(log, "held-out accuracy " + fixed6(accuracy));
  if (accuracy < kAccuracyGate) {
    throw GateFailed("held-out accuracy " + fixed6(accuracy) + " is below " +
                     fixed6(kAccuracyGate));
  }
  return params;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  const NetworkParams params = obtain_recognizer(cfg.resolved_params_path(), TrainOptions{}, log);
  std::vector<TrialResult> results;
  ExperimentReport report = execute(params, cfg, log, cfg.dump_images ? &results : nullptr);

  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "trials.csv", emit_trials_csv(report.rows));
  write_text(cfg.out_dir / "summary.csv", emit_summary_csv(report.summary));

  if (cfg.dump_images) {
    const auto dir = cfg.out_dir / "images";
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const TrialResult& r = results[i];
      const std::string stem = "trial" + std::to_string(i);
      write_pgm(r.original, dir / (stem + "_original.pgm"));
      for (std::size_t m = 0; m < r.outcomes.size(); ++m) {
        const std::string name(method_name(cfg.methods[m]));
        write_pgm(r.outcomes[m].adversarial_doc, dir / (stem + "_" + name + "_adv.pgm"));
        write_pgm(r.outcomes[m].attacked_crop, dir / (stem + "_" + name + "_crop.pgm"));
      }
    }
  }
  return report;
}

std::vector<MethodSummary> summarize(const std::vector<TrialRow>& rows,
                                     const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    std::vector<TrialMetrics> trials;
    for (const TrialRow& r : rows) {
      if (r.method != method_name(m)) continue;
      trials.push_back({r.success, {r.l_full, r.l_crop, r.mse_full, r.time_s}});
    }
    if (trials.empty()) continue;
    out.push_back({std::string(method_name(m)), aggregate(trials)});
  }
  return out;
}

std::string emit_trials_csv(const std::vector<TrialRow>& rows) {
  std::string out(kTrialsHeader);
  out += '\n';
  for (const TrialRow& r : rows) {
    out += r.method + ',' + std::to_string(r.trial) + ',' + (r.success ? "1" : "0") + ',' +
           std::to_string(r.l_full) + ',' + std::to_string(r.l_crop) + ',' + fixed6(r.mse_full) +
           ',' + fixed6(r.time_s) + ',' + std::to_string(r.h1_queries) + ',' +
           std::to_string(r.h2_queries) + ',' + std::to_string(r.gradient_calls) + '\n';
  }
  return out;
}

std::string emit_summary_csv(const std::vector<MethodSummary>& rows) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const MethodSummary& r : rows) {
    const SummaryRow& s = r.summary;
    out += r.method + ',' + fixed6(s.success_rate) + ',' + fixed6(s.mean_l_full) + ',' +
           fixed6(s.mean_l_crop) + ',' + fixed6(s.mean_mse) + ',' + fixed6(s.mean_time_s) + '\n';
  }
  return out;
}

std::vector<TrialRow> parse_trials_csv(std::string_view text) {
  std::vector<TrialRow> rows;
  for (std::string_view line : data_lines(text, kTrialsHeader)) {
    const auto f = split(line, ',');
    if (f.size() != 10) throw ConfigInvalid("trial row needs 10 fields");
    if (f[2] != "0" && f[2] != "1") throw ConfigInvalid("success must be 0 or 1");
    rows.push_back({std::string(f[0]), parse_number<std::size_t>(f[1]), f[2] == "1",
                    parse_number<std::size_t>(f[3]), parse_number<std::size_t>(f[4]),
                    parse_number<double>(f[5]), parse_number<double>(f[6]),
                    parse_number<std::uint64_t>(f[7]), parse_number<std::uint64_t>(f[8]),
                    parse_number<std::uint64_t>(f[9])});
  }
  return rows;
}

std::vector<MethodSummary> parse_summary_csv(std::string_view text) {
  std::vector<MethodSummary> rows;
  for (std::string_view line : data_lines(text, kSummaryHeader)) {
    const auto f = split(line, ',');
    if (f.size() != 6) throw ConfigInvalid("summary row needs 6 fields");
    rows.push_back({std::string(f[0]),
                    {parse_number<double>(f[1]), parse_number<double>(f[2]),
                     parse_number<double>(f[3]), parse_number<double>(f[4]),
                     parse_number<double>(f[5])}});
  }
  return rows;
}

bool summary_consistent(const std::vector<TrialRow>& rows,
                        const std::vector<MethodSummary>& summary, double tolerance) {
  for (const MethodSummary& s : summary) {
    std::vector<TrialMetrics> trials;
    for (const TrialRow& r : rows) {
      if (r.method == s.method) {
        trials.push_back({r.success, {r.l_full, r.l_crop, r.mse_full, r.time_s}});
      }
    }
    if (trials.empty()) return false;
    const SummaryRow want = aggregate(trials);
    const double diffs[] = {want.success_rate - s.summary.success_rate,
                            want.mean_l_full - s.summary.mean_l_full,
                            want.mean_l_crop - s.summary.mean_l_crop,
                            want.mean_mse - s.summary.mean_mse,
                            want.mean_time_s - s.summary.mean_time_s};
    for (double d : diffs) {
      if (std::abs(d) > tolerance) return false;
    }
  }
  return true;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IOFailure("write to " + path.string() + " failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace kos
