#include "kos/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kos/attacks.hpp"
#include "kos/errors.hpp"
#include "kos/glyphs.hpp"
#include "kos/metrics.hpp"
#include "kos/pipeline.hpp"
#include "kos/rng.hpp"

namespace kos {
namespace oracle {

std::size_t recursive_levenshtein(std::string_view a, std::string_view b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::size_t replace = recursive_levenshtein(a.substr(1), b.substr(1)) + (a[0] != b[0]);
  const std::size_t drop_a = recursive_levenshtein(a.substr(1), b) + 1;
  const std::size_t drop_b = recursive_levenshtein(a, b.substr(1)) + 1;
  return std::min({replace, drop_a, drop_b});
}

std::optional<RegionSpec> brute_force_region(const Image& doc, double threshold,
                                             std::size_t padding) {
  bool found = false;
  std::size_t top_ink = 0;
  std::size_t left_ink = 0;
  for (std::size_t r = 0; r < doc.height(); ++r) {
    for (std::size_t c = 0; c < doc.width(); ++c) {
      if (doc.at(r, c) >= threshold) continue;
      if (!found || r < top_ink) top_ink = r;
      if (!found || c < left_ink) left_ink = c;
      found = true;
    }
  }
  if (!found) return std::nullopt;
  // Slide the padded anchor back inside the page if it overhangs.
  std::int64_t top = static_cast<std::int64_t>(top_ink) - static_cast<std::int64_t>(padding);
  std::int64_t left = static_cast<std::int64_t>(left_ink) - static_cast<std::int64_t>(padding);
  top = std::clamp<std::int64_t>(top, 0, static_cast<std::int64_t>(doc.height() - kWindowHeight));
  left = std::clamp<std::int64_t>(left, 0, static_cast<std::int64_t>(doc.width() - kWindowWidth));
  return RegionSpec{static_cast<std::size_t>(top), static_cast<std::size_t>(left), kWindowHeight,
                    kWindowWidth};
}

namespace {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double loss_of(const NetworkParams& params, const Image& crop, const DigitString& target) {
  return evaluate(params, crop, &target, false, nullptr).loss;
}

// Fourth-order central difference. The loss can be large (tens) on a trained
// recognizer, so a wider step with a higher-order stencil keeps cancellation
// error well below the truncation error of the plain two-point rule.
template <typename F>
double five_point(const F& f, double h) {
  return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
}

}  // namespace

GradientCheck check_input_gradient(const NetworkParams& params, const Image& crop,
                                   const DigitString& target, std::size_t coordinates,
                                   std::uint64_t seed, double step, double floor) {
  const Tensor grad = loss_and_input_grad(params, crop, target).input_grad;
  auto rng = make_rng(seed, 0x6678);
  GradientCheck out{coordinates, 0.0};
  for (std::size_t n = 0; n < coordinates; ++n) {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, crop.size() - 1));
    const double numeric = five_point(
        [&](double offset) {
          Image moved = crop;
          moved.pixels()[i] += offset;
          return loss_of(params, moved, target);
        },
        step);
    out.worst_relative_error =
        std::max(out.worst_relative_error, relative_error(grad[i], numeric, floor));
  }
  return out;
}

GradientCheck check_param_gradient(const NetworkParams& params, const Image& crop,
                                   const DigitString& target, std::size_t coordinates,
                                   std::uint64_t seed, double step, double floor) {
  const ParamGrads grads = param_grad(params, crop, target);
  auto rng = make_rng(seed, 0x7078);
  GradientCheck out{coordinates, 0.0};
  const std::size_t total = params.parameter_count();
  for (std::size_t n = 0; n < coordinates; ++n) {
    // Uniform over the flattened parameter vector.
    auto flat = static_cast<std::size_t>(uniform_int(rng, 0, total - 1));
    std::size_t t = 0;
    while (flat >= params.tensors()[t].numel()) flat -= params.tensors()[t++].numel();
    const double numeric = five_point(
        [&](double offset) {
          NetworkParams moved = params;
          moved.tensors()[t][flat] += offset;
          return loss_of(moved, crop, target);
        },
        step);
    out.worst_relative_error = std::max(
        out.worst_relative_error, relative_error(grads.tensors()[t][flat], numeric, floor));
  }
  return out;
}

Image random_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x696D67);
  Image out(height, width);
  for (double& v : out.pixels()) v = uniform(rng, 0.0, 1.0);
  return out;
}

}  // namespace oracle

namespace {

std::vector<std::string> all_strings(std::string_view alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char c : alphabet) out.push_back(out[i] + c);
    }
    begin = end;
  }
  return out;
}

// Mostly blank page with a few random dark pixels, some near the borders.
Image sparse_ink_page(std::uint64_t seed) {
  auto rng = make_rng(seed, 0x7370);
  Image page(kDocHeight, kDocWidth, kPaperLevel);
  const auto count = uniform_int(rng, 1, 6);
  for (std::int64_t n = 0; n < count; ++n) {
    const auto r = static_cast<std::size_t>(uniform_int(rng, 0, kDocHeight - 1));
    const auto c = static_cast<std::size_t>(uniform_int(rng, 0, kDocWidth - 1));
    page.at(r, c) = uniform(rng, 0.0, kInkThreshold);
  }
  return page;
}

CheckResult levenshtein_check() {
  const auto strings = all_strings("01.", 5);
  std::size_t pairs = 0;
  for (const auto& a : strings) {
    for (const auto& b : strings) {
      ++pairs;
      if (levenshtein(a, b) != oracle::recursive_levenshtein(a, b)) {
        return {"levenshtein vs recursive oracle", false, "mismatch on '" + a + "','" + b + "'"};
      }
    }
  }
  return {"levenshtein vs recursive oracle", true, std::to_string(pairs) + " pairs"};
}

CheckResult detector_check() {
  const InkRegionDetector detector;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Image doc = s % 2 == 0 ? render_document(random_label(s), s).full_image
                                 : sparse_ink_page(s);
    const auto want = oracle::brute_force_region(doc, kInkThreshold, kDetectorPadding);
    if (!want || detector.detect(doc) != *want) {
      return {"detect_region vs brute-force scan", false, "seed " + std::to_string(s)};
    }
  }
  return {"detect_region vs brute-force scan", true, "100 documents"};
}

CheckResult roundtrip_check() {
  auto rng = make_rng(11, 0x7274);
  for (std::size_t n = 0; n < 100; ++n) {
    const Image doc = oracle::random_image(kDocHeight, kDocWidth, n);
    const RegionSpec r{static_cast<std::size_t>(uniform_int(rng, 0, kDocHeight - kWindowHeight)),
                       static_cast<std::size_t>(uniform_int(rng, 0, kDocWidth - kWindowWidth)),
                       kWindowHeight, kWindowWidth};
    if (reinsert(doc, r, crop(doc, r)) != doc) {
      return {"reinsert(crop) round trip", false, "case " + std::to_string(n)};
    }
  }
  return {"reinsert(crop) round trip", true, "100 cases"};
}

CheckResult gradient_check() {
  const NetworkParams params = NetworkParams::random(5);
  const DocumentSample doc = render_document(DigitString("079.12"), 3);
  const Image window = crop(doc.full_image, doc.true_region);
  const DigitString target("100.00");
  const auto in = oracle::check_input_gradient(params, window, target, 100, 1);
  const auto par = oracle::check_param_gradient(params, window, target, 100, 2);
  const double worst = std::max(in.worst_relative_error, par.worst_relative_error);
  return {"gradients vs central differences", worst <= 1e-4,
          "worst relative error " + std::to_string(worst)};
}

CheckResult serialization_check() {
  const NetworkParams params = NetworkParams::random(9);
  const bool ok = deserialize(serialize(params)) == params;
  return {"parameter serialization round trip", ok, ""};
}

CheckResult reduction_check() {
  const auto params = std::make_shared<const NetworkParams>(NetworkParams::random(4));
  const Image doc = oracle::random_image(kWindowHeight, kWindowWidth, 21);
  const DigitString target("100.00");
  AttackConfig cfg;
  cfg.max_iterations = 30;
  cfg.max_restarts = 1;
  PipelineHandle handle(params, std::make_shared<IdentityDetector>());
  const AttackOutcome kos = kos_attack(handle, doc, target, cfg);
  const PgdResult pgd = pgd_targeted(*params, doc, target, cfg);
  return {"identity-h1 KoS equals PGD", kos.attacked_crop == pgd.crop, ""};
}

CheckResult bisection_check() {
  Image lo(1, 1, 0.0);
  Image hi(1, 1, 1.0);
  const Image found = boundary_search(lo, hi, [](const Image& x) { return x.at(0, 0) >= 0.5; });
  const double err = std::abs(found.at(0, 0) - 0.5);
  return {"boundary search on a 1-D threshold", err <= 1e-3 && found.at(0, 0) >= 0.5,
          "error " + std::to_string(err)};
}

CheckResult budget_check() {
  const auto params = std::make_shared<const NetworkParams>(NetworkParams::random(6));
  const DocumentSample doc = render_document(DigitString("079.12"), 8);
  AttackConfig cfg;
  cfg.max_iterations = 20;
  bool ok = true;
  const auto watch = [&](const Image& working, const Image& reference) {
    for (std::size_t i = 0; i < working.size(); ++i) {
      const double v = working.pixels()[i];
      if (v < 0.0 || v > 1.0 || std::abs(v - reference.pixels()[i]) > cfg.epsilon) ok = false;
    }
  };
  PipelineHandle handle(params);
  const AttackOutcome out = kos_attack(handle, doc.full_image, DigitString("100.00"), cfg, watch);
  for (double v : out.adversarial_doc.pixels()) ok = ok && v >= 0.0 && v <= 1.0;
  return {"pixel range and epsilon ball", ok, ""};
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  return {levenshtein_check(), detector_check(),      roundtrip_check(), gradient_check(),
          serialization_check(), reduction_check(), bisection_check(), budget_check()};
}

}  // namespace kos
