#include "kos/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "kos/errors.hpp"
#include "kos/glyphs.hpp"
#include "kos/rng.hpp"

namespace kos {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Interval [ref - eps, ref + eps] within [0,1], nudged inward so that
// |v - ref| <= eps also holds when evaluated in floating point.
std::pair<double, double> ball_bounds(double ref, double eps) {
  double lo = std::max(0.0, ref - eps);
  double hi = std::min(1.0, ref + eps);
  while (ref - lo > eps) lo = std::nextafter(lo, 1.0);
  while (hi - ref > eps) hi = std::nextafter(hi, 0.0);
  return {lo, hi};
}

// x <- clamp(x - step * sign(grad)) inside [ref - eps, ref + eps] and [0,1].
void signed_step(Image& x, std::span<const double> grad, const Image& reference,
                 const AttackConfig& cfg) {
  auto px = x.pixels();
  const auto pr = reference.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double g = grad[i];
    const double sign = (g > 0.0) - (g < 0.0);
    const auto [lo, hi] = ball_bounds(pr[i], cfg.epsilon);
    px[i] = std::clamp(px[i] - cfg.step_size * sign, lo, hi);
  }
}

std::string safe_full_prediction(PipelineHandle& handle, const Image& doc) {
  try {
    return handle.run_pipeline(doc).prediction.str();
  } catch (const NoInkFound&) {
    return {};
  }
}

// Fills predictions and metrics from an uncounted copy of the pipeline, so
// the reported success is always a fresh end-to-end evaluation.
AttackOutcome finalize(const PipelineHandle& handle, const Image& doc, const DigitString& target,
                       Image adversarial_doc, Image attacked_crop, QueryCounts spent,
                       std::uint64_t gradient_calls, Clock::time_point start) {
  AttackOutcome out;
  out.elapsed_seconds = seconds_since(start);
  auto verifier = handle.fresh();
  out.final_full_pred = safe_full_prediction(*verifier, adversarial_doc);
  if (attacked_crop.size() == 0) attacked_crop = crop(adversarial_doc, verifier->detect_region(doc));
  out.final_crop_pred = verifier->recognize(attacked_crop).str();
  out.success = out.final_full_pred == target.str();
  out.metrics.l_full = levenshtein(target.str(), out.final_full_pred);
  out.metrics.l_crop = levenshtein(target.str(), out.final_crop_pred);
  out.metrics.mse_full = mse(adversarial_doc, doc);
  out.metrics.elapsed_seconds = out.elapsed_seconds;
  out.adversarial_doc = std::move(adversarial_doc);
  out.attacked_crop = std::move(attacked_crop);
  out.h1_queries = spent.h1;
  out.h2_queries = spent.h2;
  out.gradient_calls = gradient_calls;
  return out;
}

RegionSpec expand_region(const RegionSpec& region, std::size_t margin, const Image& doc) {
  const std::size_t top = region.top > margin ? region.top - margin : 0;
  const std::size_t left = region.left > margin ? region.left - margin : 0;
  const std::size_t bottom = std::min(doc.height(), region.top + region.height + margin);
  const std::size_t right = std::min(doc.width(), region.left + region.width + margin);
  return {top, left, bottom - top, right - left};
}

struct BudgetExhausted {};

double l2_distance(const Image& a, const Image& b) {
  return std::sqrt(mse(a, b) * static_cast<double>(a.size()));
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigInvalid("epsilon must be positive");
  if (!(step_size > 0.0)) throw ConfigInvalid("step size must be positive");
  if (k < 1) throw ConfigInvalid("k must be at least 1");
  if (eot_crops < 1) throw ConfigInvalid("eot_crops must be at least 1");
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kBaseline: return "baseline";
    case Method::kEot: return "eot";
    case Method::kKos: return "kos";
    case Method::kHsj: return "hsj";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kBaseline, Method::kEot, Method::kKos, Method::kHsj}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigInvalid("unknown method '" + std::string(name) + "'");
}

std::uint64_t h1_query_budget(Method method, const AttackConfig& cfg) {
  const std::uint64_t checks = (cfg.max_iterations + cfg.k - 1) / cfg.k + 1;
  switch (method) {
    case Method::kBaseline: return 2;
    case Method::kEot: return 1 + checks;
    // Per restart: one reference detection, then a domain check and a
    // success check per pass.
    case Method::kKos: return cfg.max_restarts * (1 + 2 * checks);
    case Method::kHsj: return cfg.hsj_queries;
  }
  return 0;
}

std::vector<TrialMetrics> to_trial_metrics(std::span<const AttackOutcome> outcomes) {
  std::vector<TrialMetrics> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back({o.success, o.metrics});
  return out;
}

bool pgd_step(const NetworkParams& params, Image& working, const Image& reference,
              const DigitString& target, const AttackConfig& cfg) {
  const Evaluation e = evaluate(params, working, &target, true, nullptr);
  if (decode(e.logits) == target) return false;
  signed_step(working, e.input_grad.data, reference, cfg);
  return true;
}

PgdResult pgd_targeted(const NetworkParams& params, const Image& crop, const DigitString& target,
                       const AttackConfig& cfg, const StepObserver& observer) {
  PgdResult result{crop, 0, 0, false};
  while (result.steps < cfg.max_iterations) {
    ++result.gradient_calls;
    if (!pgd_step(params, result.crop, crop, target, cfg)) {
      result.reached_target = true;
      return result;
    }
    ++result.steps;
    if (observer) observer(result.crop, crop);
  }
  result.reached_target = decode(forward(params, result.crop)) == target;
  return result;
}

AttackOutcome baseline_reinsert_attack(PipelineHandle& handle, const Image& doc,
                                       const DigitString& target, const AttackConfig& cfg,
                                       const StepObserver& observer) {
  cfg.validate();
  const auto start = Clock::now();
  const QueryCounts before = handle.counts();
  const RegionSpec region = handle.detect_region(doc);
  PgdResult pgd = pgd_targeted(handle.recognizer(), crop(doc, region), target, cfg, observer);
  Image adversarial = reinsert(doc, region, pgd.crop);
  handle.run_pipeline(adversarial);
  const QueryCounts after = handle.counts();
  return finalize(handle, doc, target, std::move(adversarial), std::move(pgd.crop),
                  {after.h1 - before.h1, after.h2 - before.h2}, pgd.gradient_calls, start);
}

std::vector<Offset> eot_valid_offsets(const Image& clean_context, Offset fallback) {
  std::vector<Offset> out;
  const auto ink = ink_bounds(clean_context);
  if (clean_context.height() >= kWindowHeight && clean_context.width() >= kWindowWidth) {
    for (std::size_t dy = 0; dy + kWindowHeight <= clean_context.height(); ++dy) {
      for (std::size_t dx = 0; dx + kWindowWidth <= clean_context.width(); ++dx) {
        if (ink && (dy > ink->min_row || dy + kWindowHeight <= ink->max_row ||
                    dx > ink->min_col || dx + kWindowWidth <= ink->max_col)) {
          continue;
        }
        out.push_back({dy, dx});
      }
    }
  }
  if (out.empty()) out.push_back(fallback);
  return out;
}

EotGradient eot_average_gradient(const NetworkParams& params, const Image& context,
                                 std::span<const Offset> offsets, const DigitString& target) {
  if (offsets.empty()) throw EmptyInput("no EoT offsets");
  EotGradient out{Tensor({context.height(), context.width()}), true};
  for (const Offset& off : offsets) {
    const RegionSpec window{off.dy, off.dx, kWindowHeight, kWindowWidth};
    const Evaluation e = evaluate(params, crop(context, window), &target, true, nullptr);
    if (decode(e.logits) != target) out.all_on_target = false;
    for (std::size_t r = 0; r < kWindowHeight; ++r) {
      double* dst = out.mean_grad.data.data() + (off.dy + r) * context.width() + off.dx;
      const double* src = e.input_grad.data.data() + r * kWindowWidth;
      for (std::size_t c = 0; c < kWindowWidth; ++c) dst[c] += src[c];
    }
  }
  const double n = static_cast<double>(offsets.size());
  for (double& v : out.mean_grad.data) v /= n;
  return out;
}

AttackOutcome eot_crop_robust_attack(PipelineHandle& handle, const Image& doc,
                                     const DigitString& target, const AttackConfig& cfg,
                                     const StepObserver& observer) {
  cfg.validate();
  const auto start = Clock::now();
  const QueryCounts before = handle.counts();
  const NetworkParams& params = handle.recognizer();

  const RegionSpec region = handle.detect_region(doc);
  const RegionSpec context_region = expand_region(region, cfg.eot_margin, doc);
  const Image clean_context = crop(doc, context_region);
  Image context = clean_context;
  const std::vector<Offset> valid = eot_valid_offsets(
      clean_context, {region.top - context_region.top, region.left - context_region.left});

  auto rng = make_rng(cfg.seed, 0x656F74);
  std::vector<Offset> sampled(cfg.eot_crops);
  std::uint64_t gradient_calls = 0;
  std::size_t steps = 0;
  for (;;) {
    if (steps % cfg.k == 0 || steps == cfg.max_iterations) {
      const Image candidate = reinsert(doc, context_region, context);
      if (handle.run_pipeline(candidate).prediction == target) break;
    }
    if (steps >= cfg.max_iterations) break;
    for (auto& off : sampled) {
      off = valid[static_cast<std::size_t>(uniform_int(rng, 0, valid.size() - 1))];
    }
    const EotGradient g = eot_average_gradient(params, context, sampled, target);
    gradient_calls += sampled.size();
    if (!g.all_on_target) signed_step(context, g.mean_grad.data, clean_context, cfg);
    ++steps;
    if (observer) observer(context, clean_context);
  }

  Image adversarial = reinsert(doc, context_region, context);
  Image attacked = crop(adversarial, region);
  const QueryCounts after = handle.counts();
  return finalize(handle, doc, target, std::move(adversarial), std::move(attacked),
                  {after.h1 - before.h1, after.h2 - before.h2}, gradient_calls, start);
}

AttackOutcome kos_attack(PipelineHandle& handle, const Image& doc, const DigitString& target,
                         const AttackConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const auto start = Clock::now();
  const QueryCounts before = handle.counts();
  const NetworkParams& params = handle.recognizer();

  Image doc_adv = doc;
  Image working;
  std::uint64_t gradient_calls = 0;
  std::size_t domain_changes = 0;
  bool reached = false;

  for (std::size_t restart = 0; restart < cfg.max_restarts && !reached; ++restart) {
    // Reference domain, and the working crop re-derived from the current
    // adversarial document so earlier progress inside the window survives.
    const RegionSpec domain = handle.detect_region(doc_adv);
    working = crop(doc_adv, domain);
    const Image reference = crop(doc, domain);

    std::size_t iteration = 0;
    while (iteration < cfg.max_iterations) {
      if (!same_domain(handle.detect_region(doc_adv), domain)) {
        ++domain_changes;
        break;
      }
      if (handle.run_pipeline(doc_adv).prediction == target) {
        reached = true;
        break;
      }
      for (std::size_t k = 0; k < cfg.k && iteration < cfg.max_iterations; ++k) {
        pgd_step(params, working, reference, target, cfg);
        ++gradient_calls;
        ++iteration;
        if (observer) observer(working, reference);
      }
      // Paste into the untouched original, not the evolving document.
      doc_adv = reinsert(doc, domain, working);
    }
  }

  const QueryCounts after = handle.counts();
  AttackOutcome out = finalize(handle, doc, target, std::move(doc_adv), std::move(working),
                               {after.h1 - before.h1, after.h2 - before.h2}, gradient_calls,
                               start);
  out.restarts = domain_changes;
  return out;
}

Image boundary_search(const Image& original, const Image& adversarial, const DecisionFn& decide,
                      double pixel_tolerance, double blend_tolerance) {
  if (!original.same_shape(adversarial)) throw DimensionMismatch("boundary search endpoints");
  const auto po = original.pixels();
  const auto pa = adversarial.pixels();
  double spread = 0.0;
  for (std::size_t i = 0; i < po.size(); ++i) spread = std::max(spread, std::abs(pa[i] - po[i]));
  if (spread == 0.0) return adversarial;
  const double threshold = std::min(blend_tolerance, pixel_tolerance / spread);

  auto blend = [&](double alpha) {
    Image out(original.height(), original.width());
    auto px = out.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = (1.0 - alpha) * po[i] + alpha * pa[i];
    return out;
  };

  double low = 0.0;
  double high = 1.0;
  try {
    while (high - low > threshold) {
      const double mid = 0.5 * (low + high);
      if (decide(blend(mid))) {
        high = mid;
      } else {
        low = mid;
      }
    }
  } catch (const BudgetExhausted&) {
    // Whatever bracket we have is still valid on the adversarial side.
  }
  return high == 1.0 ? adversarial : blend(high);
}

Image hop_skip_jump_core(const Image& original, const Image& init_adv, const DecisionFn& decide,
                         std::size_t query_budget, std::uint64_t seed, HsjTrace* trace) {
  const auto dim = static_cast<double>(original.size());
  // Standard l2 settings: theta = 1 / d^1.5 sets both the bisection
  // precision and the probe radius.
  const double theta = 1.0 / (dim * std::sqrt(dim));

  std::size_t used = 0;
  DecisionFn budgeted = [&](const Image& x) {
    if (used >= query_budget) throw BudgetExhausted{};
    ++used;
    return decide(x);
  };

  Image current = boundary_search(original, init_adv, budgeted, 1e-3, theta);
  Image best = current;
  double best_mse = mse(best, original);
  double dist = l2_distance(current, original);
  if (trace) trace->best_mse.push_back(best_mse);

  boost::random::mt19937 noise_rng(static_cast<std::uint32_t>(splitmix64(seed)));
  boost::random::normal_distribution<double> normal;
  std::vector<double> probe(original.size());
  std::vector<double> sum_weighted(original.size());
  std::vector<double> sum_plain(original.size());
  Image perturbed(original.height(), original.width());

  try {
    for (std::size_t t = 1;; ++t) {
      const double delta = t == 1 ? 0.1 : std::sqrt(dim) * theta * dist;
      const auto probes = static_cast<std::size_t>(
          std::min(10000.0, 100.0 * std::sqrt(static_cast<double>(t))));

      // Monte-Carlo estimate of the boundary normal from signed decisions at
      // random points around the current boundary point.
      std::fill(sum_weighted.begin(), sum_weighted.end(), 0.0);
      std::fill(sum_plain.begin(), sum_plain.end(), 0.0);
      double sum_sign = 0.0;
      const auto pc = current.pixels();
      auto pp = perturbed.pixels();
      for (std::size_t b = 0; b < probes; ++b) {
        double norm = 0.0;
        for (double& v : probe) {
          v = normal(noise_rng);
          norm += v * v;
        }
        const double scale = delta / std::sqrt(norm);
        for (std::size_t i = 0; i < pp.size(); ++i) {
          pp[i] = std::clamp(pc[i] + scale * probe[i], 0.0, 1.0);
        }
        const double sign = budgeted(perturbed) ? 1.0 : -1.0;
        sum_sign += sign;
        for (std::size_t i = 0; i < pp.size(); ++i) {
          const double rv = (pp[i] - pc[i]) / delta;
          sum_weighted[i] += sign * rv;
          sum_plain[i] += rv;
        }
      }
      const double n = static_cast<double>(probes);
      const double mean_sign = sum_sign / n;
      std::vector<double> direction(original.size());
      for (std::size_t i = 0; i < direction.size(); ++i) {
        if (mean_sign == 1.0) {
          direction[i] = sum_plain[i] / n;
        } else if (mean_sign == -1.0) {
          direction[i] = -sum_plain[i] / n;
        } else {
          direction[i] = (sum_weighted[i] - mean_sign * sum_plain[i]) / n;
        }
      }
      double dnorm = 0.0;
      for (double v : direction) dnorm += v * v;
      dnorm = std::sqrt(dnorm);
      if (dnorm == 0.0) break;
      for (double& v : direction) v /= dnorm;

      // Geometric step search along the estimate.
      double step = dist / std::sqrt(static_cast<double>(t));
      Image candidate(original.height(), original.width());
      auto pcand = candidate.pixels();
      bool found = false;
      while (step > 1e-12) {
        for (std::size_t i = 0; i < pcand.size(); ++i) {
          pcand[i] = std::clamp(pc[i] + step * direction[i], 0.0, 1.0);
        }
        if (budgeted(candidate)) {
          found = true;
          break;
        }
        step *= 0.5;
      }
      if (found) current = boundary_search(original, candidate, budgeted, 1e-3, theta);
      dist = l2_distance(current, original);

      const double m = mse(current, original);
      if (m < best_mse) {
        best_mse = m;
        best = current;
      }
      if (trace) {
        trace->best_mse.push_back(best_mse);
        trace->iterations = t;
      }
    }
  } catch (const BudgetExhausted&) {
  }
  return best;
}

AttackOutcome hop_skip_jump(PipelineHandle& handle, const Image& doc, const DigitString& target,
                            const Image& init_adv_doc, const AttackConfig& cfg, HsjTrace* trace) {
  cfg.validate();
  const auto start = Clock::now();
  const QueryCounts before = handle.counts();
  if (!doc.same_shape(init_adv_doc)) throw DimensionMismatch("initial document size differs");
  if (cfg.hsj_queries == 0) throw ConfigInvalid("hop_skip_jump needs a positive query budget");

  const DecisionFn is_target = [&](const Image& x) {
    try {
      return handle.run_pipeline(x).prediction == target;
    } catch (const NoInkFound&) {
      return false;
    }
  };
  if (!is_target(init_adv_doc)) {
    throw InvalidInitialization("starting document does not decode to " + target.str());
  }
  Image best = hop_skip_jump_core(doc, init_adv_doc, is_target, cfg.hsj_queries - 1, cfg.seed,
                                  trace);

  const RegionSpec original_region = handle.fresh()->detect_region(doc);
  Image attacked = crop(best, original_region);
  const QueryCounts after = handle.counts();
  return finalize(handle, doc, target, std::move(best), std::move(attacked),
                  {after.h1 - before.h1, after.h2 - before.h2}, 0, start);
}

Image template_paste_init(const PipelineHandle& handle, const Image& doc,
                          const DigitString& target, std::uint64_t seed) {
  auto probe = handle.fresh();
  const RegionSpec region = probe->detect_region(doc);
  const DocumentSample source = render_document(target, seed);
  return reinsert(doc, region, crop(source.full_image, source.true_region));
}

Image target_sample_init(const PipelineHandle& handle, const DigitString& target,
                         std::uint64_t seed, std::size_t max_attempts) {
  auto probe = handle.fresh();
  for (std::size_t a = 0; a < max_attempts; ++a) {
    DocumentSample sample = render_document(target, seed + a);
    if (probe->run_pipeline(sample.full_image).prediction == target) {
      return std::move(sample.full_image);
    }
  }
  throw InvalidInitialization("no clean rendering of " + target.str() + " was read correctly");
}

}  // namespace kos
