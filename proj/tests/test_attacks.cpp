#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "kos/attacks.hpp"
#include "kos/errors.hpp"
#include "kos/glyphs.hpp"
#include "kos/metrics.hpp"
#include "kos/selftest.hpp"

using namespace kos;

namespace {

// h1 that returns the clean window for x0 and the window one column to the
// left for any other document, i.e. every reinsertion moves the domain.
class ShiftOnEditDetector final : public RegionDetector {
 public:
  explicit ShiftOnEditDetector(Image x0) : x0_(std::move(x0)), base_(InkRegionDetector{}.detect(x0_)) {}

  RegionSpec detect(const Image& doc) const override {
    if (doc == x0_) return base_;
    RegionSpec shifted = base_;
    shifted.left -= 1;
    return shifted;
  }

  const RegionSpec& base() const { return base_; }

 private:
  Image x0_;
  RegionSpec base_;
};

// Reads every input as `label`.
std::shared_ptr<const NetworkParams> constant_recognizer(const DigitString& label) {
  auto params = std::make_shared<NetworkParams>(NetworkParams::zeros());
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    params->tensors()[5 + 2 * cell][label.class_at(cell)] = 60.0;
  }
  return params;
}

const DigitString kTarget("100.00");

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("config validation and method names") {
  AttackConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg = {};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg = {};
  cfg.step_size = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg = {};
  cfg.eot_crops = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  for (Method m : {Method::kBaseline, Method::kEot, Method::kKos, Method::kHsj}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("pgd"), ConfigInvalid);
}

TEST_CASE("h1 budgets") {
  AttackConfig cfg;
  cfg.max_iterations = 10;
  cfg.k = 5;
  cfg.max_restarts = 3;
  CHECK(h1_query_budget(Method::kBaseline, cfg) == 2);
  CHECK(h1_query_budget(Method::kEot, cfg) == 4);
  CHECK(h1_query_budget(Method::kKos, cfg) == 3 * (1 + 2 * 3));
  CHECK(h1_query_budget(Method::kHsj, cfg) == cfg.hsj_queries);
}

TEST_CASE("pgd step") {
  const auto params = test::random_recognizer(0);
  const Image clean = test::clean_window();
  AttackConfig cfg;

  SUBCASE("moves by at most one step and stays in the ball") {
    Image working = clean;
    REQUIRE(pgd_step(*params, working, clean, kTarget, cfg));
    CHECK(test::linf(working, clean) <= cfg.step_size + 1e-15);
    CHECK_FALSE(working == clean);
  }
  SUBCASE("is a no-op once the target is read") {
    const auto fixed = constant_recognizer(kTarget);
    Image working = clean;
    CHECK_FALSE(pgd_step(*fixed, working, clean, kTarget, cfg));
    CHECK(working == clean);
  }
  SUBCASE("pgd_targeted reaches the target on an untrained recognizer") {
    const PgdResult r = pgd_targeted(*params, clean, kTarget, cfg);
    CHECK(r.reached_target);
    CHECK(decode(forward(*params, r.crop)) == kTarget);
    CHECK(r.gradient_calls == r.steps + 1);
    CHECK(test::linf(r.crop, clean) <= cfg.epsilon);
  }
  SUBCASE("pgd_targeted stops at max_iterations") {
    cfg.max_iterations = 3;
    const PgdResult r = pgd_targeted(*params, clean, kTarget, cfg);
    CHECK(r.steps == 3);
    CHECK(r.gradient_calls == 3);
  }
}

TEST_CASE("every gradient step stays in [0,1] and in the epsilon ball") {
  const auto params = test::random_recognizer(1);
  const DocumentSample doc = render_document(DigitString("079.12"), 4);
  AttackConfig cfg;
  cfg.max_iterations = 40;
  cfg.epsilon = 0.05;
  std::size_t observed = 0;
  bool ok = true;
  const StepObserver watch = [&](const Image& w, const Image& ref) {
    ++observed;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double v = w.pixels()[i];
      ok = ok && v >= 0.0 && v <= 1.0 && std::abs(v - ref.pixels()[i]) <= cfg.epsilon;
    }
  };
  const auto check_doc = [&](const AttackOutcome& out) {
    for (double v : out.adversarial_doc.pixels()) REQUIRE((v >= 0.0 && v <= 1.0));
    CHECK(test::linf(out.adversarial_doc, doc.full_image) <= cfg.epsilon);
  };
  {
    PipelineHandle h(params);
    check_doc(baseline_reinsert_attack(h, doc.full_image, kTarget, cfg, watch));
  }
  {
    PipelineHandle h(params);
    check_doc(eot_crop_robust_attack(h, doc.full_image, kTarget, cfg, watch));
  }
  {
    PipelineHandle h(params);
    check_doc(kos_attack(h, doc.full_image, kTarget, cfg, watch));
  }
  CHECK(observed > 0);
  CHECK(ok);
}

TEST_CASE("identity h1: KoS ends on the same crop as plain PGD") {
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto params = test::random_recognizer(seed);
    const Image doc = test::clean_window("079.12", 10 + seed);
    AttackConfig cfg;
    cfg.max_iterations = 60;
    PipelineHandle handle(params, std::make_shared<IdentityDetector>());
    const AttackOutcome kos = kos_attack(handle, doc, kTarget, cfg);
    const PgdResult pgd = pgd_targeted(*params, doc, kTarget, cfg);
    CHECK(pgd.reached_target);
    CHECK(kos.attacked_crop == pgd.crop);
    CHECK(kos.adversarial_doc == pgd.crop);
    CHECK(kos.restarts == 0);
    CHECK(kos.success);
  }
}

TEST_CASE("a window that moves after every edit defeats reinsertion but not KoS") {
  const auto params = test::random_recognizer(0);
  const DocumentSample doc = render_document(DigitString("079.12"), 3);
  auto detector = std::make_shared<ShiftOnEditDetector>(doc.full_image);
  REQUIRE(detector->base().left >= 1);
  AttackConfig cfg;
  cfg.max_iterations = 100;

  PipelineHandle base_handle(params, detector);
  const AttackOutcome baseline = baseline_reinsert_attack(base_handle, doc.full_image, kTarget, cfg);
  CHECK(decode(forward(*params, baseline.attacked_crop)) == kTarget);
  CHECK_FALSE(baseline.success);

  PipelineHandle kos_handle(params, detector);
  const AttackOutcome kos = kos_attack(kos_handle, doc.full_image, kTarget, cfg);
  CHECK(kos.success);
  CHECK(kos.restarts == 1);
  CHECK(kos.final_full_pred == "100.00");
  CHECK(kos.metrics.l_full == 0);
  CHECK(kos.h1_queries <= h1_query_budget(Method::kKos, cfg));
}

TEST_CASE("outcome bookkeeping") {
  const auto params = test::random_recognizer(2);
  const DocumentSample doc = render_document(DigitString("079.12"), 6);
  AttackConfig cfg;
  cfg.max_iterations = 30;

  PipelineHandle h(params);
  const AttackOutcome out = baseline_reinsert_attack(h, doc.full_image, kTarget, cfg);
  CHECK(out.h1_queries == 2);
  CHECK(out.h2_queries == 1);
  CHECK(h.counts() == QueryCounts{2, 1});
  CHECK(out.metrics.l_full == levenshtein(out.final_full_pred, kTarget.str()));
  CHECK(out.metrics.l_crop == levenshtein(out.final_crop_pred, kTarget.str()));
  CHECK(out.metrics.mse_full == mse(out.adversarial_doc, doc.full_image));
  CHECK(out.success == (out.final_full_pred == kTarget.str()));
  CHECK(out.elapsed_seconds >= 0.0);

  for (Method m : {Method::kEot, Method::kKos}) {
    PipelineHandle hm(params);
    const AttackOutcome o = m == Method::kEot
                                ? eot_crop_robust_attack(hm, doc.full_image, kTarget, cfg)
                                : kos_attack(hm, doc.full_image, kTarget, cfg);
    CHECK(o.h1_queries <= h1_query_budget(m, cfg));
    CHECK(o.gradient_calls > 0);
  }
  const std::vector<AttackOutcome> both{out, out};
  const auto trials = to_trial_metrics(both);
  REQUIRE(trials.size() == 2);
  CHECK(trials[1].metrics.l_full == out.metrics.l_full);
}

TEST_CASE("attacks are deterministic") {
  const auto params = test::random_recognizer(4);
  const DocumentSample doc = render_document(DigitString("100.00"), 9);
  const DigitString target("079.12");
  AttackConfig cfg;
  cfg.max_iterations = 25;
  cfg.seed = 5;
  PipelineHandle h1(params);
  PipelineHandle h2(params);
  CHECK(eot_crop_robust_attack(h1, doc.full_image, target, cfg).adversarial_doc ==
        eot_crop_robust_attack(h2, doc.full_image, target, cfg).adversarial_doc);
  CHECK(kos_attack(h1, doc.full_image, target, cfg).adversarial_doc ==
        kos_attack(h2, doc.full_image, target, cfg).adversarial_doc);
}


TEST_CASE("valid offsets keep the ink inside the window") {
  const DocumentSample doc = render_document(DigitString("079.12"), 3);
  const RegionSpec ctx{doc.true_region.top - 4, doc.true_region.left - 4, kWindowHeight + 8,
                       kWindowWidth + 8};
  const Image context = crop(doc.full_image, ctx);
  const auto ink = ink_bounds(context);
  REQUIRE(ink.has_value());
  const auto offsets = eot_valid_offsets(context, {4, 4});
  CHECK_FALSE(offsets.empty());
  CHECK(std::find(offsets.begin(), offsets.end(), Offset{4, 4}) != offsets.end());
  for (const Offset& o : offsets) {
    CHECK(o.dy <= ink->min_row);
    CHECK(o.dx <= ink->min_col);
    CHECK(o.dy + kWindowHeight > ink->max_row);
    CHECK(o.dx + kWindowWidth > ink->max_col);
  }
  SUBCASE("window-sized context has one offset") {
    const auto one = eot_valid_offsets(crop(doc.full_image, doc.true_region), {0, 0});
    CHECK(one == std::vector<Offset>{{0, 0}});
  }
  SUBCASE("too-wide ink falls back") {
    Image wide(kWindowHeight + 2, kWindowWidth + 2, 1.0);
    wide.at(0, 0) = 0.0;
    wide.at(kWindowHeight + 1, kWindowWidth + 1) = 0.0;
    CHECK(eot_valid_offsets(wide, {1, 1}) == std::vector<Offset>{{1, 1}});
  }
}

TEST_CASE("averaged gradient of one window is that window's gradient") {
  const auto params = test::random_recognizer(3);
  const Image window = test::clean_window();
  const std::vector<Offset> single{{0, 0}};
  const EotGradient g = eot_average_gradient(*params, window, single, kTarget);
  CHECK(g.mean_grad == loss_and_input_grad(*params, window, kTarget).input_grad);
  CHECK_FALSE(g.all_on_target);
  const std::vector<Offset> triple{{0, 0}, {0, 0}, {0, 0}};
  const EotGradient g3 = eot_average_gradient(*params, window, triple, kTarget);
  for (std::size_t i = 0; i < g.mean_grad.numel(); ++i) {
    REQUIRE(g3.mean_grad[i] == doctest::Approx(g.mean_grad[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(eot_average_gradient(*params, window, {}, kTarget), EmptyInput);
}

TEST_CASE("averaged gradient places each window in the context frame") {
  const auto params = test::random_recognizer(3);
  const Image context = oracle::random_image(kWindowHeight + 2, kWindowWidth + 3, 8);
  const std::vector<Offset> offsets{{0, 0}, {2, 3}};
  const EotGradient g = eot_average_gradient(*params, context, offsets, kTarget);
  Tensor expected({context.height(), context.width()});
  for (const Offset& o : offsets) {
    const Tensor w = loss_and_input_grad(*params, crop(context, {o.dy, o.dx}), kTarget).input_grad;
    for (std::size_t r = 0; r < kWindowHeight; ++r) {
      for (std::size_t c = 0; c < kWindowWidth; ++c) {
        expected[(o.dy + r) * context.width() + o.dx + c] += 0.5 * w[r * kWindowWidth + c];
      }
    }
  }
  for (std::size_t i = 0; i < expected.numel(); ++i) {
    REQUIRE(g.mean_grad[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero margin and one sample reduce to PGD under identity h1") {
  const auto params = test::random_recognizer(1);
  const Image doc = test::clean_window("079.12", 12);
  AttackConfig cfg;
  cfg.eot_margin = 0;
  cfg.eot_crops = 1;
  cfg.max_iterations = 60;
  PipelineHandle handle(params, std::make_shared<IdentityDetector>());
  const AttackOutcome eot = eot_crop_robust_attack(handle, doc, kTarget, cfg);
  const PgdResult pgd = pgd_targeted(*params, doc, kTarget, cfg);
  CHECK(eot.attacked_crop == pgd.crop);
  CHECK(eot.success == pgd.reached_target);
}



TEST_CASE("boundary search") {
  const Image lo(1, 1, 0.0);
  const Image hi(1, 1, 1.0);
  const auto at = [](double t) { return [t](const Image& x) { return x.at(0, 0) >= t; }; };
  for (double t : {0.1, 0.37, 0.5, 0.99}) {
    const Image found = boundary_search(lo, hi, at(t));
    CHECK(found.at(0, 0) >= t);
    CHECK(found.at(0, 0) - t <= 1e-3);
  }
  CHECK(boundary_search(hi, hi, at(0.5)) == hi);
  CHECK_THROWS_AS(boundary_search(lo, Image(1, 2), at(0.5)), DimensionMismatch);
}

TEST_CASE("core converges toward the projection on a half-space") {
  // Decision: mean pixel >= 0.5. The closest point to a flat 0.2 image is
  // flat 0.5, with MSE 0.09.
  const Image original(4, 4, 0.2);
  const Image init = [] {
    Image x = oracle::random_image(4, 4, 3);
    for (double& v : x.pixels()) v = 0.6 + 0.4 * v;
    return x;
  }();
  const DecisionFn decide = [](const Image& x) { return x.mean() >= 0.5; };
  REQUIRE(decide(init));
  HsjTrace trace;
  const Image best = hop_skip_jump_core(original, init, decide, 3000, 1, &trace);
  CHECK(decide(best));
  CHECK(mse(best, original) <= 0.09 * 1.05);
  CHECK(trace.iterations > 0);
  REQUIRE(trace.best_mse.size() == trace.iterations + 1);
  for (std::size_t i = 1; i < trace.best_mse.size(); ++i) {
    CHECK(trace.best_mse[i] <= trace.best_mse[i - 1]);
  }
}

TEST_CASE("core respects its query budget") {
  const Image original(4, 4, 0.2);
  const Image init(4, 4, 0.9);
  std::size_t calls = 0;
  const DecisionFn decide = [&](const Image& x) {
    ++calls;
    return x.mean() >= 0.5;
  };
  hop_skip_jump_core(original, init, decide, 250, 2);
  CHECK(calls == 250);
}

TEST_CASE("pipeline wrapper") {
  const DocumentSample doc = render_document(DigitString("079.12"), 2);
  AttackConfig cfg;
  cfg.hsj_queries = 40;

  SUBCASE("rejects a start that is not read as the target") {
    PipelineHandle handle(test::random_recognizer(0));
    CHECK_THROWS_AS(hop_skip_jump(handle, doc.full_image, kTarget, doc.full_image, cfg),
                    InvalidInitialization);
    CHECK_THROWS_AS(target_sample_init(handle, kTarget, 1, 3), InvalidInitialization);
    CHECK_THROWS_AS(hop_skip_jump(handle, doc.full_image, kTarget, Image(2, 2), cfg),
                    DimensionMismatch);
  }
  SUBCASE("query accounting and pixel range") {
    PipelineHandle handle(constant_recognizer(kTarget));
    const Image init = target_sample_init(handle, kTarget, 11);
    CHECK(init == render_document(kTarget, 11).full_image);
    CHECK(handle.counts() == QueryCounts{0, 0});
    const AttackOutcome out = hop_skip_jump(handle, doc.full_image, kTarget, init, cfg);
    CHECK(out.h1_queries == cfg.hsj_queries);
    CHECK(out.gradient_calls == 0);
    CHECK(out.success);
    for (double v : out.adversarial_doc.pixels()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
  SUBCASE("template paste lands in the detected window") {
    PipelineHandle handle(test::random_recognizer(0));
    const Image pasted = template_paste_init(handle, doc.full_image, kTarget, 5);
    const DocumentSample source = render_document(kTarget, 5);
    CHECK(crop(pasted, doc.true_region) == crop(source.full_image, source.true_region));
    CHECK(handle.counts() == QueryCounts{0, 0});
  }
}


}  // TEST_SUITE
