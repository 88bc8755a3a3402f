#include "doctest.h"

#include "forgetd/pipeline.hpp"
#include "forgetd/unlearn.hpp"

#include <bit>
#include <cmath>
#include <utility>
#include <vector>

using namespace forgetd;

namespace {

Architecture probe_arch() {
    Architecture arch;
    arch.in_channels = 1;
    arch.in_h = 4;
    arch.in_w = 4;
    arch.layers = {LayerSpec::flatten(), LayerSpec::dense(16, 3)};  // smooth end to end
    return arch;
}

struct Trained {
    Dataset ds;
    SplitPair split;
    ModelParams init;
    ModelParams final_params;
    Ledger full;
    Ledger pruned;
};

// Two-epoch run on a tiny synthetic set, recorded into a full ledger and a
// zero-pruned one so both amnesiac variants can be exercised.
Trained train_tiny(double prune_p = 0.0) {
    Trained t;
    t.ds = synth_dataset(60, 3, 4, 4, 21);
    t.split = split_target(t.ds, 1u);

    const Architecture arch = probe_arch();
    TrainConfig cfg{.epochs = 2, .batch_size = 10, .learning_rate = 0.05, .seed = 5};
    const BatchPlan plan = make_batch_plan(t.ds, cfg.batch_size, cfg.epochs, cfg.seed);

    PrunePlan pp{PruneStrategy::random, {prune_p}, 13};
    t.full = make_ledger(arch, LedgerMode::full, {}, 2, 6);
    t.pruned = make_ledger(arch, LedgerMode::pruned, pp, 2, 6);
    TrainResult tr = train_model(arch, t.ds, plan, cfg, {&t.full, &t.pruned});
    t.init = std::move(tr.init);
    t.final_params = std::move(tr.trained);
    return t;
}

bool mask_bits(const Vector& mask, std::initializer_list<double> want) {
    if (static_cast<std::size_t>(mask.size()) != want.size()) return false;
    Eigen::Index i = 0;
    for (double w : want)
        if (mask[i++] != w) return false;
    return true;
}

}  // namespace

TEST_CASE("selection masks: circular shift over a contiguous base") {
    SelectionPlan plan{{0.5}, 1};
    CHECK(mask_bits(make_selection_mask(plan, 0, 4, 0), {1, 1, 0, 0}));
    CHECK(mask_bits(make_selection_mask(plan, 0, 4, 1), {0, 1, 1, 0}));
    CHECK(mask_bits(make_selection_mask(plan, 0, 4, 2), {0, 0, 1, 1}));
    CHECK(mask_bits(make_selection_mask(plan, 0, 4, 4), {1, 1, 0, 0}));  // full period

    SelectionPlan wide{{0.5}, 2};
    CHECK(mask_bits(make_selection_mask(wide, 0, 4, 1), {0, 0, 1, 1}));

    SelectionPlan all{{1.0}, 1};
    CHECK(mask_bits(make_selection_mask(all, 0, 4, 3), {1, 1, 1, 1}));

    for (std::size_t e = 0; e < 9; ++e) {
        const Vector m = make_selection_mask(SelectionPlan{{0.3}, 1}, 0, 10, e);
        CHECK(m.sum() == 3.0);  // shifting never changes the live count
    }

    CHECK_THROWS_AS(make_selection_mask(SelectionPlan{{0.0}, 1}, 0, 4, 0), ConfigError);
    CHECK_THROWS_AS(make_selection_mask(SelectionPlan{{1.5}, 1}, 0, 4, 0), ConfigError);
}

TEST_CASE("selection_schedule interpolates between endpoints") {
    const auto q = selection_schedule(3, 0.9, 0.1);
    REQUIRE(q.size() == 3);
    CHECK(q[0] == doctest::Approx(0.9));
    CHECK(q[1] == doctest::Approx(0.5));
    CHECK(q[2] == doctest::Approx(0.1));
    CHECK(selection_schedule(1, 0.9, 0.1) == std::vector<double>{0.9});

    const auto rev = selection_schedule(2, 0.1, 0.9);
    CHECK(rev[0] == doctest::Approx(0.1));
    CHECK(rev[1] == doctest::Approx(0.9));
}

TEST_CASE("partial_gradient masks each layer independently") {
    ParamShaped grads(2);
    grads[0].values = Vector::LinSpaced(4, 1.0, 4.0);
    grads[0].weight_count = 4;
    grads[1].values = Vector::LinSpaced(3, -1.0, 1.0);
    grads[1].weight_count = 3;

    std::vector<Vector> masks = {Vector::Ones(4), Vector::Zero(3)};
    const ParamShaped out = partial_gradient(grads, masks);
    CHECK((out[0].values.array() == grads[0].values.array()).all());
    CHECK(out[1].values.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(partial_gradient(grads, {Vector::Ones(4)}), InputError);
}

TEST_CASE("amnesiac: empty affected set is a bitwise no-op") {
    Trained t = train_tiny();
    const auto stages = amnesiac_unlearn(t.final_params, t.full, {}, false);
    REQUIRE(stages.size() == 1);
    CHECK(bitwise_equal(stages[0], t.final_params));
}

TEST_CASE("amnesiac: subtracting every update recovers the initial weights") {
    Trained t = train_tiny();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> all;
    for (std::uint32_t e = 0; e < 2; ++e)
        for (std::uint32_t b = 0; b < 6; ++b) all.emplace_back(e, b);
    const auto stages = amnesiac_unlearn(t.final_params, t.full, all, false);
    CHECK(max_abs_diff(stages[0], t.init) < 1e-9);
}

TEST_CASE("amnesiac: staged run ends where the unstaged one does") {
    Trained t = train_tiny();
    const auto affected = affected_batches(t.full, t.split.targeted.sample_ids);
    REQUIRE_FALSE(affected.empty());

    const auto unstaged = amnesiac_unlearn(t.final_params, t.full, affected, false);
    const auto staged = amnesiac_unlearn(t.final_params, t.full, affected, true);
    REQUIRE(staged.size() == 2);  // one stage per training epoch
    CHECK(max_abs_diff(staged.back(), unstaged[0]) < 1e-12);

    // the first stage only undoes epoch-0 updates, so it differs from the end
    CHECK(max_abs_diff(staged[0], staged[1]) > 0.0);
}

TEST_CASE("amnesiac variants insist on the matching ledger mode") {
    Trained t = train_tiny();
    CHECK_THROWS_AS(amnesiac_unlearn(t.final_params, t.pruned, {}, false), ConfigError);
    CHECK_THROWS_AS(partial_amnesiac_unlearn(t.final_params, t.full, {}, false), ConfigError);
}

TEST_CASE("amnesiac rejects a ledger from a different architecture") {
    Trained t = train_tiny();
    Architecture other = probe_arch();
    other.layers.push_back(LayerSpec::relu());
    const Ledger foreign = make_ledger(other, LedgerMode::full, {}, 1, 1);
    CHECK_THROWS_WITH_AS(amnesiac_unlearn(t.final_params, foreign, {}, false),
                         doctest::Contains("fingerprint"), IntegrityError);
}

TEST_CASE("partial amnesiac: p=1 removes nothing, p=0 equals the conventional result") {
    Trained everything = train_tiny(1.0);
    const auto affected =
        affected_batches(everything.pruned, everything.split.targeted.sample_ids);
    const auto none = partial_amnesiac_unlearn(everything.final_params, everything.pruned,
                                               affected, false);
    CHECK(bitwise_equal(none[0], everything.final_params));

    Trained zero = train_tiny(0.0);
    const auto aff0 = affected_batches(zero.full, zero.split.targeted.sample_ids);
    const auto conventional = amnesiac_unlearn(zero.final_params, zero.full, aff0, false);
    const auto partial = partial_amnesiac_unlearn(zero.final_params, zero.pruned, aff0, false);
    CHECK(bitwise_equal(partial[0], conventional[0]));
}

TEST_CASE("label flip: zero learning rate leaves the model bitwise untouched") {
    Trained t = train_tiny();
    const Dataset flipped = flip_labels(t.split.targeted, t.ds.classes, 3);
    UnlearnConfig cfg;
    cfg.algorithm = UnlearnAlgorithm::label_flip;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 2;
    cfg.target_accuracy_stop = -1.0;  // never stop early; the point is the epoch count
    const UnlearnResult res = label_flip_unlearn(t.final_params, flipped, t.split, cfg);
    CHECK(bitwise_equal(res.params, t.final_params));
    REQUIRE(res.trajectory.size() == 3);  // baseline + one row per epoch
    CHECK(res.trajectory[0].epoch == 0);
    CHECK(res.trajectory[1].targeted_acc == res.trajectory[0].targeted_acc);
}

TEST_CASE("label flip: all-ones selection equals the unmasked run bitwise") {
    Trained t = train_tiny();
    const Dataset flipped = flip_labels(t.split.targeted, t.ds.classes, 3);
    UnlearnConfig cfg;
    cfg.algorithm = UnlearnAlgorithm::label_flip_partial;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 3;
    cfg.target_accuracy_stop = 0.0;

    SelectionPlan all{{1.0}, 1};
    const UnlearnResult masked = label_flip_unlearn(t.final_params, flipped, t.split, cfg, &all);
    const UnlearnResult naive = label_flip_unlearn(t.final_params, flipped, t.split, cfg);
    CHECK(bitwise_equal(masked.params, naive.params));
}

TEST_CASE("optimization: all-ones selection equals the unmasked run bitwise") {
    Trained t = train_tiny();
    UnlearnConfig cfg;
    cfg.algorithm = UnlearnAlgorithm::optimization_partial;
    cfg.learning_rate = 0.001;
    cfg.max_epochs = 3;
    cfg.target_accuracy_stop = 0.0;

    SelectionPlan all{{1.0}, 1};
    const UnlearnResult masked = optimization_unlearn(t.final_params, t.split, cfg, &all);
    const UnlearnResult naive = optimization_unlearn(t.final_params, t.split, cfg);
    CHECK(bitwise_equal(masked.params, naive.params));
}

TEST_CASE("optimization: one ascent step raises the targeted loss") {
    Trained t = train_tiny();
    UnlearnConfig cfg;
    cfg.algorithm = UnlearnAlgorithm::optimization;
    cfg.learning_rate = 1e-4;
    cfg.max_epochs = 1;
    cfg.target_accuracy_stop = 0.0;

    const Batch targeted = slice_batch(t.split.targeted, 0, t.split.targeted.size());
    const double before = loss_and_grads(t.final_params, targeted).loss;
    const UnlearnResult res = optimization_unlearn(t.final_params, t.split, cfg);
    const double after = loss_and_grads(res.params, targeted).loss;
    CHECK(after > before);
}

TEST_CASE("retraining stops once targeted accuracy reaches the threshold") {
    Trained t = train_tiny();
    const Dataset flipped = flip_labels(t.split.targeted, t.ds.classes, 3);
    UnlearnConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.max_epochs = 40;
    cfg.target_accuracy_stop = 0.10;
    const UnlearnResult res = label_flip_unlearn(t.final_params, flipped, t.split, cfg);

    REQUIRE(res.trajectory.size() >= 2);
    for (std::size_t i = 0; i + 1 < res.trajectory.size(); ++i) {
        CHECK(res.trajectory[i].epoch == i);
        if (i > 0) CHECK(res.trajectory[i].targeted_acc > cfg.target_accuracy_stop);
    }
    CHECK(res.trajectory.back().targeted_acc <= cfg.target_accuracy_stop);
    CHECK(res.trajectory.size() <= cfg.max_epochs + 1);
}

TEST_CASE("label flip: redrawing flips each epoch changes the path") {
    Trained t = train_tiny();
    const Dataset flipped = flip_labels(t.split.targeted, t.ds.classes, 3);
    UnlearnConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 3;
    cfg.target_accuracy_stop = -1.0;  // never stop early, so the redraw epochs run
    cfg.seed = 7;

    const UnlearnResult fixed = label_flip_unlearn(t.final_params, flipped, t.split, cfg);
    cfg.redraw_flips = true;
    const UnlearnResult redrawn = label_flip_unlearn(t.final_params, flipped, t.split, cfg);
    CHECK_FALSE(bitwise_equal(fixed.params, redrawn.params));

    const UnlearnResult redrawn2 = label_flip_unlearn(t.final_params, flipped, t.split, cfg);
    CHECK(bitwise_equal(redrawn.params, redrawn2.params));  // still deterministic
}

TEST_CASE("retraining rejects an empty targeted set and bad selection plans") {
    Trained t = train_tiny();
    UnlearnConfig cfg;

    Dataset empty;
    CHECK_THROWS_AS(label_flip_unlearn(t.final_params, empty, t.split, cfg), InputError);

    SelectionPlan wrong{{0.5, 0.5}, 1};  // model has one parameterized layer
    const Dataset flipped = flip_labels(t.split.targeted, t.ds.classes, 3);
    CHECK_THROWS_AS(label_flip_unlearn(t.final_params, flipped, t.split, cfg, &wrong),
                    ConfigError);
}
