#ifndef KOS_ATTACKS_HPP
#define KOS_ATTACKS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kos/digit_string.hpp"
#include "kos/image.hpp"
#include "kos/metrics.hpp"
#include "kos/nn.hpp"
#include "kos/pipeline.hpp"

namespace kos {

struct AttackConfig {
  double epsilon = 0.25;           // L-inf budget around the clean pixels
  double step_size = 0.01;
  std::size_t k = 5;               // gradient steps between h1 feedback checks
  std::size_t max_iterations = 400;
  std::size_t max_restarts = 10;
  std::size_t eot_crops = 10;
  std::size_t eot_margin = 4;
  std::size_t hsj_queries = 20000;
  std::uint64_t seed = 0;

  // Throws ConfigInvalid.
  void validate() const;
};

enum class Method { kBaseline, kEot, kKos, kHsj };

std::string_view method_name(Method method);
// Throws ConfigInvalid on an unknown name.
Method parse_method(std::string_view name);

// Upper bound on h1 queries a method may spend under cfg.
std::uint64_t h1_query_budget(Method method, const AttackConfig& cfg);

struct AttackOutcome {
  bool success = false;
  Image adversarial_doc;
  Image attacked_crop;           // the window the attack worked on, as it ended
  std::string final_crop_pred;   // h2 on attacked_crop
  std::string final_full_pred;   // h2(h1(adversarial_doc)); empty if h1 found no ink
  MetricBundle metrics;
  std::uint64_t h1_queries = 0;
  std::uint64_t h2_queries = 0;
  std::uint64_t gradient_calls = 0;
  double elapsed_seconds = 0.0;
  std::size_t restarts = 0;      // domain changes seen (KoS only)
};

std::vector<TrialMetrics> to_trial_metrics(std::span<const AttackOutcome> outcomes);

// Called after every gradient step with the perturbed working image and the
// clean image it must stay within epsilon of.
using StepObserver = std::function<void(const Image& working, const Image& reference)>;

// One signed-gradient step of the targeted loss on `working`, projected into
// the epsilon ball around `reference` and into [0,1]. A no-op returning false
// when `working` already decodes to target. Always costs one gradient call.
bool pgd_step(const NetworkParams& params, Image& working, const Image& reference,
              const DigitString& target, const AttackConfig& cfg);

struct PgdResult {
  Image crop;
  std::size_t steps = 0;
  std::size_t gradient_calls = 0;
  bool reached_target = false;
};

// Repeats pgd_step until the crop decodes to target or max_iterations steps.
PgdResult pgd_targeted(const NetworkParams& params, const Image& crop, const DigitString& target,
                       const AttackConfig& cfg, const StepObserver& observer = {});

// Attack h2 alone on the detected crop, paste the result back once.
AttackOutcome baseline_reinsert_attack(PipelineHandle& handle, const Image& doc,
                                       const DigitString& target, const AttackConfig& cfg,
                                       const StepObserver& observer = {});

struct Offset {
  std::size_t dy = 0;
  std::size_t dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

// Window offsets inside `context` that keep every ink pixel of the clean
// context inside the window. Never empty: falls back to `fallback`.
std::vector<Offset> eot_valid_offsets(const Image& clean_context, Offset fallback);

struct EotGradient {
  Tensor mean_grad;          // context-sized
  bool all_on_target = true; // every sampled window already decodes to target
};

// Input gradients of the sampled windows, summed in the context frame and
// divided by the number of samples.
EotGradient eot_average_gradient(const NetworkParams& params, const Image& context,
                                 std::span<const Offset> offsets, const DigitString& target);

// Gradient averaging over random window offsets in a padded context, with
// end-to-end checks every k steps.
AttackOutcome eot_crop_robust_attack(PipelineHandle& handle, const Image& doc,
                                     const DigitString& target, const AttackConfig& cfg,
                                     const StepObserver& observer = {});

// Keep-on-Swimming: attack the current h1 output, paste into the original
// every k steps, and restart from h1's new output whenever the window moves.
AttackOutcome kos_attack(PipelineHandle& handle, const Image& doc, const DigitString& target,
                         const AttackConfig& cfg, const StepObserver& observer = {});

using DecisionFn = std::function<bool(const Image&)>;

// Bisection on the segment original -> adversarial. Returns the adversarial
// end of the final bracket. Stops once the bracket spans at most
// pixel_tolerance in every pixel and at most blend_tolerance in blend weight.
Image boundary_search(const Image& original, const Image& adversarial, const DecisionFn& decide,
                      double pixel_tolerance = 1e-3, double blend_tolerance = 1.0);

struct HsjTrace {
  std::vector<double> best_mse;  // after the initial search and every iteration
  std::size_t iterations = 0;
};

// Decision-based targeted attack on the whole pipeline, starting from a
// document the pipeline already reads as target. Throws
// InvalidInitialization otherwise.
AttackOutcome hop_skip_jump(PipelineHandle& handle, const Image& doc, const DigitString& target,
                            const Image& init_adv_doc, const AttackConfig& cfg,
                            HsjTrace* trace = nullptr);

// Same algorithm against an arbitrary decision function with a query budget.
// Returns the lowest-MSE adversarial point found.
Image hop_skip_jump_core(const Image& original, const Image& init_adv, const DecisionFn& decide,
                         std::size_t query_budget, std::uint64_t seed, HsjTrace* trace = nullptr);

// Clean document of target pasted over doc's detected window. Uses an
// uncounted pipeline copy.
Image template_paste_init(const PipelineHandle& handle, const Image& doc,
                          const DigitString& target, std::uint64_t seed);

// An independent clean document the pipeline reads as target, the usual
// targeted starting point for hop_skip_jump. Tries placement seeds seed,
// seed+1, ... and throws InvalidInitialization after max_attempts misses.
Image target_sample_init(const PipelineHandle& handle, const DigitString& target,
                         std::uint64_t seed, std::size_t max_attempts = 8);

}  // namespace kos

#endif  // KOS_ATTACKS_HPP
