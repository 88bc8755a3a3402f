// Acceptance harness. Each numbered check prints exactly one PASS or FAIL
// line on stdout; stage curves and other diagnostics go to stderr. The exit
// status is nonzero when any check fails.
//
// Checks 6 through 11 run the reference protocol: 10k train / 2k eval images,
// a 784-500-10 dense model, batch 128, 8 epochs, target class 3, three seeds.
// Set FORGETD_MNIST_DIR to a directory with the usual IDX files to run them
// on real digits; otherwise a synthetic corpus with the same shape is used.

#include "forgetd/arch.hpp"
#include "forgetd/checkpoint.hpp"
#include "forgetd/common.hpp"
#include "forgetd/data.hpp"
#include "forgetd/eval.hpp"
#include "forgetd/ledger.hpp"
#include "forgetd/nn.hpp"
#include "forgetd/pipeline.hpp"
#include "forgetd/rng.hpp"
#include "forgetd/tensor.hpp"
#include "forgetd/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <utility>
#include <vector>

using namespace forgetd;

namespace {

// Protocol rates. An 8-epoch run on 10k images needs a training rate around
// 0.02: much smaller rates leave the thin-margin class untrained so there is
// nothing to erase, and much hotter rates make one-shot bulk subtraction
// collapse the model to chance, where the sweep curves are noise. The
// retrain rates for checks 8 and 9 drive both the naive and the masked
// variant under the matched targeted bound (3%) within the epoch cap.
constexpr double kTrainLr = 0.02;
constexpr double kFlipLr = 0.05;
constexpr double kAscentLr = 0.01;
constexpr std::size_t kRetrainEpochs = 20;
constexpr double kMatchedTau = 0.03;

int g_failures = 0;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

void verdict(int num, const char* name, bool ok, const std::string& detail) {
    std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", num, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void info(const std::string& line) { std::fprintf(stderr, "  %s\n", line.c_str()); }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> all_pairs(const Ledger& led) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(led.records.size());
    for (const UpdateRecord& r : led.records) out.emplace_back(r.epoch, r.batch);
    return out;
}

// ---- check 1: analytic vs central finite-difference gradients --------------

Architecture mlp_probe() {
    Architecture a;
    a.in_channels = 1;
    a.in_h = 2;
    a.in_w = 2;
    a.layers = {LayerSpec::flatten(), LayerSpec::dense(4, 3), LayerSpec::relu(),
                LayerSpec::dense(3, 2)};
    return a;
}

Architecture conv_probe() {
    Architecture a;
    a.in_channels = 1;
    a.in_h = 6;
    a.in_w = 6;
    a.layers = {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2d(2),
                LayerSpec::flatten(), LayerSpec::dense(8, 3)};
    return a;
}

double max_rel_grad_err(const Architecture& arch, std::uint64_t seed) {
    ModelParams m = build_model(arch, seed);
    Rng rng(mix_seed(seed, 17));
    const std::size_t n = 8;
    const std::size_t classes = arch.num_classes();
    Batch b;
    b.inputs = Tensor::zeros({n, arch.in_channels, arch.in_h, arch.in_w});
    for (Eigen::Index i = 0; i < b.inputs.data.size(); ++i) b.inputs.data[i] = rng.next_unit();
    b.one_hot = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
    for (std::size_t i = 0; i < n; ++i)
        b.one_hot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(rng.below(classes))) =
            1.0;

    const LossGrads lg = loss_and_grads(m, b);
    const double eps = 1e-6;
    double worst = 0.0;
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        for (Eigen::Index j = 0; j < m.layers[li].values.size(); ++j) {
            const double keep = m.layers[li].values[j];
            m.layers[li].values[j] = keep + eps;
            const double up = loss_and_grads(m, b).loss;
            m.layers[li].values[j] = keep - eps;
            const double down = loss_and_grads(m, b).loss;
            m.layers[li].values[j] = keep;
            const double fd = (up - down) / (2.0 * eps);
            const double an = lg.grads[li].values[j];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

void check_gradient() {
    const auto t0 = Clock::now();
    const double m_err = max_rel_grad_err(mlp_probe(), 3);
    const double c_err = max_rel_grad_err(conv_probe(), 4);
    const double dt = seconds_since(t0);
    verdict(1, "gradient-check", std::max(m_err, c_err) < 1e-5 && dt < 5.0,
            fmt("max rel err %.2e (dense %.2e, conv %.2e), %.2fs", std::max(m_err, c_err), m_err,
                c_err, dt));
}

// ---- checks 2 to 5: exact identities on a small 2-epoch run ----------------

struct TinyRun {
    Dataset train, eval;
    Architecture arch;
    TrainResult tr;
    Ledger full, pruned0;
    SplitPair split;
    double setup_seconds = 0.0;
};

TinyRun make_tiny_run() {
    TinyRun t;
    const auto t0 = Clock::now();
    t.train = synth_dataset(96, 4, 6, 6, 11);
    t.eval = synth_dataset(64, 4, 6, 6, 12);
    t.arch = make_mlp(1, 6, 6, 4, 16);
    const BatchPlan plan = make_batch_plan(t.train, 16, 2, 21);
    t.full = make_ledger(t.arch, LedgerMode::full, {}, 2,
                         static_cast<std::uint32_t>(plan.batches_per_epoch()));
    const PrunePlan zero{PruneStrategy::random, {0.0, 0.0}, 13};
    t.pruned0 = make_ledger(t.arch, LedgerMode::pruned, zero, 2,
                            static_cast<std::uint32_t>(plan.batches_per_epoch()));
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 16;
    tc.learning_rate = 0.01;
    tc.seed = 7;
    t.tr = train_model(t.arch, t.train, plan, tc, {&t.full, &t.pruned0});
    t.split = split_target(t.train, 1u);
    t.setup_seconds = seconds_since(t0);
    return t;
}

void check_replay(const TinyRun& t) {
    const auto t0 = Clock::now();
    ModelParams replayed = t.tr.init;
    const ParamShaped total = sum_updates(t.full, all_pairs(t.full));
    param_axpy(replayed, +1, total);
    const double diff = max_abs_diff(replayed, t.tr.trained);
    const double dt = t.setup_seconds + seconds_since(t0);
    verdict(2, "replay-identity", diff <= 1e-9 && dt < 10.0,
            fmt("max abs diff %.2e, %.2fs", diff, dt));
}

void check_zero_prune(const TinyRun& t) {
    const auto aff = affected_batches(t.full, t.split.targeted.sample_ids);
    const ModelParams conv = amnesiac_unlearn(t.tr.trained, t.full, aff, false).back();
    const ModelParams part = partial_amnesiac_unlearn(t.tr.trained, t.pruned0, aff, false).back();
    const bool same =
        bitwise_equal(conv, part) && serialize_checkpoint(conv) == serialize_checkpoint(part);
    verdict(3, "zero-prune-equivalence", same,
            same ? fmt("checkpoints bitwise identical over %zu affected batches", aff.size())
                 : "checkpoints differ");
}

void check_full_selection(const TinyRun& t) {
    const Dataset flipped = flip_labels(t.split.targeted, t.train.classes, 99);
    UnlearnConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 3;
    cfg.target_accuracy_stop = 0.0;
    cfg.batch_size = 16;
    cfg.seed = 55;
    const SelectionPlan all_on{{1.0, 1.0}, 1};

    cfg.algorithm = UnlearnAlgorithm::label_flip;
    const UnlearnResult nf = label_flip_unlearn(t.tr.trained, flipped, t.split, cfg);
    cfg.algorithm = UnlearnAlgorithm::label_flip_partial;
    const UnlearnResult mf = label_flip_unlearn(t.tr.trained, flipped, t.split, cfg, &all_on);

    cfg.algorithm = UnlearnAlgorithm::optimization;
    const UnlearnResult no = optimization_unlearn(t.tr.trained, t.split, cfg);
    cfg.algorithm = UnlearnAlgorithm::optimization_partial;
    const UnlearnResult mo = optimization_unlearn(t.tr.trained, t.split, cfg, &all_on);

    const bool flip_same = bitwise_equal(nf.params, mf.params);
    const bool opt_same = bitwise_equal(no.params, mo.params);
    verdict(4, "full-selection-equivalence", flip_same && opt_same,
            fmt("label flip %s, loss ascent %s", flip_same ? "bitwise equal" : "differs",
                opt_same ? "bitwise equal" : "differs"));
}

void check_restoration(const TinyRun& t) {
    const ModelParams restored =
        amnesiac_unlearn(t.tr.trained, t.full, all_pairs(t.full), false).back();
    const double pdiff = max_abs_diff(restored, t.tr.init);
    const double a0 = accuracy(t.tr.init, t.eval);
    const double a1 = accuracy(restored, t.eval);
    verdict(5, "full-subtraction-restoration", pdiff <= 1e-9 && std::abs(a1 - a0) < 1e-6,
            fmt("param diff %.2e, accuracy %.6f vs initial %.6f", pdiff, a1, a0));
}

// ---- checks 6 to 11: reference protocol, three seeds ------------------------

void load_corpus(std::uint64_t seed, Dataset& train, Dataset& eval) {
    if (const char* dir = std::getenv("FORGETD_MNIST_DIR")) {
        const auto try_pair = [&](const char* images, const char* labels, Dataset& out) {
            for (const char* suffix : {"", ".gz"}) {
                try {
                    out = load_idx(std::string(dir) + "/" + images + suffix,
                                   std::string(dir) + "/" + labels + suffix);
                    return true;
                } catch (const std::exception&) {
                }
            }
            return false;
        };
        Dataset tr_all, te_all;
        if (try_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte", tr_all) &&
            try_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", te_all) &&
            tr_all.size() >= 10000 && te_all.size() >= 2000) {
            train = take_rows(tr_all, 0, 10000);
            eval = take_rows(te_all, 0, 2000);
            return;
        }
        info("FORGETD_MNIST_DIR is set but unusable, using the synthetic corpus");
    }
    const Dataset all = synth_dataset(12000, 10, 28, 28, mix_seed(seed, 202));
    train = take_rows(all, 0, 10000);
    eval = take_rows(all, 10000, 2000);
}

struct StagePick {
    bool reached = false;
    std::size_t stage = 0;
    double targeted = 2.0;
    double retained = 0.0;
};

// First stage at or below tau; if none, the stage with the lowest targeted
// accuracy. Accuracy is measured on the training split, where membership is
// what the metric is about.
StagePick pick_stage(const std::vector<ModelParams>& stages, const SplitPair& split, double tau,
                     const std::string& tag) {
    StagePick first_hit, best;
    std::string curve;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const double ta = accuracy(stages[s], split.targeted);
        const double ra = accuracy(stages[s], split.retained);
        curve += fmt(" %.3f/%.3f", ta, ra);
        if (ta < best.targeted) best = StagePick{false, s, ta, ra};
        if (!first_hit.reached && ta <= tau) first_hit = StagePick{true, s, ta, ra};
    }
    info(tag + " staged targeted/retained:" + curve);
    return first_hit.reached ? first_hit : best;
}

struct ProtocolOut {
    std::uint64_t seed = 0;
    double run_seconds = 0.0;
    StagePick conv, part;
    bool flip_matched = false, opt_matched = false;
    double flip_naive_r = 0.0, flip_part_r = 0.0;
    double opt_naive_r = 0.0, opt_part_r = 0.0;
    std::uint64_t bytes_full = 0, bytes_pruned = 0;
    std::vector<SweepPoint> sweep;
};

ProtocolOut run_protocol(std::uint64_t seed, bool with_sweep) {
    ProtocolOut out;
    out.seed = seed;
    Dataset train, eval;
    load_corpus(seed, train, eval);
    const Architecture arch =
        make_mlp(train.channels(), train.height(), train.width(), train.classes);

    const auto t0 = Clock::now();
    const BatchPlan plan = make_batch_plan(train, 128, 8, mix_seed(seed, 101));
    const auto bpe = static_cast<std::uint32_t>(plan.batches_per_epoch());
    TrainConfig tc;
    tc.learning_rate = kTrainLr;
    tc.seed = mix_seed(seed, 100);
    const SplitPair split = split_target(train, 3u);

    // The full and the storage-schedule ledgers each run to gigabytes, so the
    // run is traced twice with the same plan and seed (training is
    // deterministic, the second pass reproduces the same weights) and each
    // pass frees its ledgers before the next allocation.
    TrainResult tr;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> aff;
    {
        Ledger full = make_ledger(arch, LedgerMode::full, {}, 8, bpe);
        const PrunePlan store{PruneStrategy::random, prune_schedule(2), mix_seed(seed, 103)};
        Ledger pruned = make_ledger(arch, LedgerMode::pruned, store, 8, bpe);
        tr = train_model(arch, train, plan, tc, {&full, &pruned});
        info(fmt("seed %llu: trained targeted %.4f retained %.4f held-out %.4f (%.1fs, loss %.4f to %.4f)",
                 (unsigned long long)seed, accuracy(tr.trained, split.targeted),
                 accuracy(tr.trained, split.retained), accuracy(tr.trained, eval),
                 seconds_since(t0), tr.epoch_losses.front(), tr.epoch_losses.back()));

        aff = affected_batches(full, split.targeted.sample_ids);
        info(fmt("seed %llu: affected batches %zu of %u", (unsigned long long)seed, aff.size(),
                 full.epochs * full.batches_per_epoch));

        const auto conv_stages = amnesiac_unlearn(tr.trained, full, aff, true);
        out.conv = pick_stage(conv_stages, split, 0.01,
                              fmt("seed %llu conventional", (unsigned long long)seed));

        out.bytes_full = ledger_size_bytes(full);
        out.bytes_pruned = ledger_size_bytes(pruned);
        if (with_sweep)
            out.sweep = sweep_affected_batches(tr.trained, full, pruned, train,
                                               {0.1, 0.25, 0.5, 0.75, 1.0}, mix_seed(seed, 105));
    }
    {
        // Erasure schedule: keep nine tenths of the hidden layer's updates
        // and one tenth of the readout's. Subtracting most of the feature
        // trajectory while the readout keeps its scale is what collapses the
        // targeted class without dragging the retained classes down.
        const PrunePlan erase{PruneStrategy::random, {0.1, 0.9}, mix_seed(seed, 107)};
        Ledger pruned = make_ledger(arch, LedgerMode::pruned, erase, 8, bpe);
        train_model(arch, train, plan, tc, {&pruned});
        const auto part_stages = partial_amnesiac_unlearn(tr.trained, pruned, aff, true);
        out.part = pick_stage(part_stages, split, 0.01,
                              fmt("seed %llu partial", (unsigned long long)seed));
    }
    out.run_seconds = seconds_since(t0);

    {
        const Dataset flipped = flip_labels(split.targeted, train.classes, mix_seed(seed, 104));
        UnlearnConfig cfg;
        cfg.learning_rate = kFlipLr;
        cfg.max_epochs = kRetrainEpochs;
        cfg.target_accuracy_stop = kMatchedTau;
        cfg.batch_size = 128;
        cfg.seed = mix_seed(seed, 104);
        cfg.algorithm = UnlearnAlgorithm::label_flip;
        const UnlearnResult naive = label_flip_unlearn(tr.trained, flipped, split, cfg);
        const SelectionPlan front{selection_schedule(2, 0.9, 0.1), 1};
        cfg.algorithm = UnlearnAlgorithm::label_flip_partial;
        const UnlearnResult part = label_flip_unlearn(tr.trained, flipped, split, cfg, &front);
        const double nt = naive.trajectory.back().targeted_acc;
        const double pt = part.trajectory.back().targeted_acc;
        out.flip_matched = nt <= kMatchedTau && pt <= kMatchedTau;
        out.flip_naive_r = naive.trajectory.back().retained_acc;
        out.flip_part_r = part.trajectory.back().retained_acc;
        info(fmt("seed %llu label flip: naive t %.4f r %.4f (%zu epochs), masked t %.4f r %.4f (%zu epochs)",
                 (unsigned long long)seed, nt, out.flip_naive_r, naive.trajectory.size() - 1, pt,
                 out.flip_part_r, part.trajectory.size() - 1));
    }
    {
        UnlearnConfig cfg;
        cfg.learning_rate = kAscentLr;
        cfg.max_epochs = kRetrainEpochs;
        cfg.target_accuracy_stop = kMatchedTau;
        cfg.batch_size = 128;
        cfg.seed = mix_seed(seed, 106);
        cfg.algorithm = UnlearnAlgorithm::optimization;
        const UnlearnResult naive = optimization_unlearn(tr.trained, split, cfg);
        const SelectionPlan back{selection_schedule(2, 0.1, 0.9), 1};
        cfg.algorithm = UnlearnAlgorithm::optimization_partial;
        const UnlearnResult part = optimization_unlearn(tr.trained, split, cfg, &back);
        const double nt = naive.trajectory.back().targeted_acc;
        const double pt = part.trajectory.back().targeted_acc;
        out.opt_matched = nt <= kMatchedTau && pt <= kMatchedTau;
        out.opt_naive_r = naive.trajectory.back().retained_acc;
        out.opt_part_r = part.trajectory.back().retained_acc;
        info(fmt("seed %llu loss ascent: naive t %.4f r %.4f (%zu epochs), masked t %.4f r %.4f (%zu epochs)",
                 (unsigned long long)seed, nt, out.opt_naive_r, naive.trajectory.size() - 1, pt,
                 out.opt_part_r, part.trajectory.size() - 1));
    }
    return out;
}

void protocol_checks() {
    std::vector<ProtocolOut> outs;
    for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
        try {
            outs.push_back(run_protocol(seed, seed == 1));
        } catch (const std::exception& e) {
            info(fmt("seed %llu protocol run failed: %s", (unsigned long long)seed, e.what()));
        }
    }
    if (outs.size() < 3) {
        for (int n = 6; n <= 11; ++n)
            verdict(n, "protocol", false, "protocol run failed, see diagnostics");
        return;
    }
    const ProtocolOut& s1 = outs[0];

    verdict(6, "staged-partial-erasure", s1.part.reached && s1.run_seconds < 300.0,
            fmt("targeted %.4f at stage %zu, run %.1fs", s1.part.targeted, s1.part.stage + 1,
                s1.run_seconds));

    bool matched7 = true;
    for (const ProtocolOut& o : outs) matched7 = matched7 && o.conv.reached && o.part.reached;
    const double gap7 = median3(outs[0].part.retained - outs[0].conv.retained,
                                outs[1].part.retained - outs[1].conv.retained,
                                outs[2].part.retained - outs[2].conv.retained);
    verdict(7, "retention-gap", matched7 && gap7 >= 0.10,
            fmt("median retained gap %.4f%s (seed 1: partial %.4f vs conventional %.4f)", gap7,
                matched7 ? "" : ", stage matching failed", s1.part.retained, s1.conv.retained));

    bool matched8 = true;
    for (const ProtocolOut& o : outs) matched8 = matched8 && o.flip_matched;
    const double gap8 = median3(outs[0].flip_part_r - outs[0].flip_naive_r,
                                outs[1].flip_part_r - outs[1].flip_naive_r,
                                outs[2].flip_part_r - outs[2].flip_naive_r);
    verdict(8, "label-flip-selection", matched8 && gap8 > 0.005,
            fmt("median retained gap %.4f%s (seed 1: masked %.4f vs naive %.4f)", gap8,
                matched8 ? "" : ", targeted bound missed", s1.flip_part_r, s1.flip_naive_r));

    bool matched9 = true;
    for (const ProtocolOut& o : outs) matched9 = matched9 && o.opt_matched;
    const double gap9 = median3(outs[0].opt_part_r - outs[0].opt_naive_r,
                                outs[1].opt_part_r - outs[1].opt_naive_r,
                                outs[2].opt_part_r - outs[2].opt_naive_r);
    verdict(9, "loss-ascent-selection", matched9 && gap9 > 0.005,
            fmt("median retained gap %.4f%s (seed 1: masked %.4f vs naive %.4f)", gap9,
                matched9 ? "" : ", targeted bound missed", s1.opt_part_r, s1.opt_naive_r));

    const auto& sw = s1.sweep;
    bool mono = sw.size() == 5;
    bool dominated = sw.size() == 5;
    for (std::size_t i = 0; i < sw.size(); ++i) {
        info(fmt("sweep f=%.2f: affected %.4f conventional %.4f partial %.4f", sw[i].fraction,
                 sw[i].affected_pct, sw[i].retained_amnesiac, sw[i].retained_partial));
        if (i > 0) mono = mono && sw[i].retained_amnesiac <= sw[i - 1].retained_amnesiac + 0.02;
        if (sw[i].fraction >= 0.25 - 1e-12)
            dominated = dominated && sw[i].retained_partial >= sw[i].retained_amnesiac;
    }
    verdict(10, "affected-fraction-sweep", mono && dominated,
            fmt("conventional %s, partial %s conventional at fractions >= 0.25",
                mono ? "non-increasing" : "increased beyond tolerance",
                dominated ? "dominates" : "falls below"));

    const double ratio =
        s1.bytes_full == 0 ? 1.0 : static_cast<double>(s1.bytes_pruned) / s1.bytes_full;
    verdict(11, "pruned-ledger-size", ratio < 0.7,
            fmt("pruned %llu vs full %llu bytes, ratio %.3f", (unsigned long long)s1.bytes_pruned,
                (unsigned long long)s1.bytes_full, ratio));
}

// ---- check 12: round trips and corrupted-input behavior --------------------

// On success the parse must reproduce the input bytes exactly; anything else
// must surface as IntegrityError, never another exception or a crash.
template <typename Parse, typename Serialize>
bool fuzz_bytes(const std::vector<std::uint8_t>& bytes, Parse parse, Serialize serialize,
                const char* what, std::string& why) {
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        const std::vector<std::uint8_t> prefix(bytes.begin(),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            parse(prefix);
            why = fmt("%s: %zu-byte prefix accepted", what, cut);
            return false;
        } catch (const IntegrityError&) {
        } catch (const std::exception& e) {
            why = fmt("%s: %zu-byte prefix threw non-integrity error: %s", what, cut, e.what());
            return false;
        }
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        for (int bit = 0; bit < 8; ++bit) {
            std::vector<std::uint8_t> mut = bytes;
            mut[i] = static_cast<std::uint8_t>(mut[i] ^ (1u << bit));
            try {
                const auto parsed = parse(mut);
                if (serialize(parsed) != mut) {
                    why = fmt("%s: silent misread at byte %zu bit %d", what, i, bit);
                    return false;
                }
            } catch (const IntegrityError&) {
            } catch (const std::exception& e) {
                why = fmt("%s: byte %zu bit %d threw non-integrity error: %s", what, i, bit,
                          e.what());
                return false;
            }
        }
    }
    return true;
}

void check_formats() {
    std::string why;
    bool ok = true;

    const ModelParams model = build_model(conv_probe(), 9);
    const std::vector<std::uint8_t> mb = serialize_checkpoint(model);
    const ModelParams mback = deserialize_checkpoint(mb);
    if (!bitwise_equal(model, mback) || serialize_checkpoint(mback) != mb) {
        ok = false;
        why = "checkpoint round trip not bit-exact";
    }

    Architecture arch;
    arch.in_channels = 1;
    arch.in_h = 2;
    arch.in_w = 2;
    arch.layers = {LayerSpec::flatten(), LayerSpec::dense(4, 3), LayerSpec::relu(),
                   LayerSpec::dense(3, 2)};
    Ledger led =
        make_ledger(arch, LedgerMode::pruned, PrunePlan{PruneStrategy::random, {0.5, 0.5}, 3}, 2, 2);
    Rng rng(31);
    const ModelParams shape = build_model(arch, 1);
    for (std::uint32_t e = 0; e < 2; ++e) {
        for (std::uint32_t b = 0; b < 2; ++b) {
            ParamShaped delta = zero_deltas_like(shape);
            for (LayerParams& l : delta)
                for (Eigen::Index i = 0; i < l.values.size(); ++i) l.values[i] = rng.normal();
            record_update(led, e, b, {e * 2ull + b, 100 + e}, delta);
        }
    }
    const std::vector<std::uint8_t> lb = serialize_ledger(led);
    if (ok) {
        const Ledger lback = deserialize_ledger(lb);
        if (serialize_ledger(lback) != lb) {
            ok = false;
            why = "ledger round trip not bit-exact";
        }
    }

    if (ok)
        ok = fuzz_bytes(
            mb, [](const std::vector<std::uint8_t>& v) { return deserialize_checkpoint(v); },
            [](const ModelParams& m) { return serialize_checkpoint(m); }, "checkpoint", why);
    if (ok)
        ok = fuzz_bytes(
            lb, [](const std::vector<std::uint8_t>& v) { return deserialize_ledger(v); },
            [](const Ledger& l) { return serialize_ledger(l); }, "ledger", why);

    verdict(12, "serialization-integrity", ok,
            ok ? fmt("round trips bit-exact, %zu checkpoint and %zu ledger mutations clean",
                     mb.size() * 8 + mb.size(), lb.size() * 8 + lb.size())
               : why);
}

}  // namespace

int main() {
    try {
        check_gradient();
    } catch (const std::exception& e) {
        verdict(1, "gradient-check", false, fmt("exception: %s", e.what()));
    }

    TinyRun tiny;
    bool tiny_ok = false;
    try {
        tiny = make_tiny_run();
        tiny_ok = true;
    } catch (const std::exception& e) {
        info(fmt("small-run setup failed: %s", e.what()));
    }
    const struct {
        int num;
        const char* name;
        void (*fn)(const TinyRun&);
    } tiny_checks[] = {
        {2, "replay-identity", check_replay},
        {3, "zero-prune-equivalence", check_zero_prune},
        {4, "full-selection-equivalence", check_full_selection},
        {5, "full-subtraction-restoration", check_restoration},
    };
    for (const auto& c : tiny_checks) {
        if (!tiny_ok) {
            verdict(c.num, c.name, false, "setup failed");
            continue;
        }
        try {
            c.fn(tiny);
        } catch (const std::exception& e) {
            verdict(c.num, c.name, false, fmt("exception: %s", e.what()));
        }
    }

    try {
        protocol_checks();
    } catch (const std::exception& e) {
        info(fmt("protocol checks aborted: %s", e.what()));
        for (int n = 6; n <= 11; ++n) verdict(n, "protocol", false, "aborted, see diagnostics");
    }

    try {
        check_formats();
    } catch (const std::exception& e) {
        verdict(12, "serialization-integrity", false, fmt("exception: %s", e.what()));
    }

    std::printf("%d of 12 checks passed\n", 12 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
