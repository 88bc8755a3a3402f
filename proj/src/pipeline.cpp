#include "forgetd/pipeline.hpp"

#include "forgetd/bytes.hpp"
#include "forgetd/rng.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace forgetd {

namespace {

std::size_t thread_cap() {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FORGETD_THREADS")) {
        try {
            cap = std::max<std::size_t>(1, std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad FORGETD_THREADS value '") + env + "'");
        }
    }
    return cap;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
}

std::string out_path(const RunConfig& cfg, const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

}  // namespace

TrainResult train_model(const Architecture& arch, const Dataset& ds, const BatchPlan& plan,
                        const TrainConfig& cfg, const std::vector<Ledger*>& recorders,
                        std::ostream* log) {
    TrainResult res;
    res.init = build_model(arch, cfg.seed);
    ModelParams model = res.init;
    const IdIndex idx = id_index(ds);

    for (std::size_t e = 0; e < plan.epoch_count(); ++e) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < plan.epochs[e].size(); ++b) {
            const std::vector<std::uint64_t>& ids = plan.epochs[e][b];
            const Batch batch = make_batch(ds, ids, idx);
            LossGrads lg = loss_and_grads(model, batch);
            SgdStep step = sgd_step(model, lg.grads, cfg.learning_rate);
            model = std::move(step.params);
            for (Ledger* led : recorders)
                record_update(*led, static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(b),
                              ids, step.delta);
            loss_sum += lg.loss;
        }
        res.epoch_losses.push_back(loss_sum / static_cast<double>(plan.epochs[e].size()));
        if (log)
            *log << "epoch " << e << ": loss " << std::fixed << std::setprecision(6)
                 << res.epoch_losses.back() << "\n";
    }
    res.trained = std::move(model);
    return res;
}

std::vector<SweepPoint> sweep_affected_batches(const ModelParams& trained, const Ledger& full,
                                               const Ledger& pruned, const Dataset& train_ds,
                                               const std::vector<double>& fractions,
                                               std::uint64_t seed) {
    const double total_batches =
        static_cast<double>(full.epochs) * static_cast<double>(full.batches_per_epoch);
    for (double f : fractions)
        if (f < 0.0 || f > 1.0)
            throw InputError("unreachable affected-batch fraction " + std::to_string(f));

    std::vector<std::uint64_t> order = train_ds.sample_ids;
    Rng rng(mix_seed(seed, 1));
    rng.shuffle(order);

    auto affected_count = [&](std::size_t k) {
        const std::vector<std::uint64_t> prefix(order.begin(),
                                                order.begin() + static_cast<std::ptrdiff_t>(k));
        return affected_batches(full, prefix).size();
    };

    std::vector<SweepPoint> points(fractions.size());
    std::vector<std::thread> pool;
    std::mutex err_mu;
    std::exception_ptr first_err;
    const std::size_t n_threads = std::min(thread_cap(), std::max<std::size_t>(1, fractions.size()));

    auto worker = [&](std::size_t tid) {
        try {
            for (std::size_t i = tid; i < fractions.size(); i += n_threads) {
                const double f = fractions[i];
                std::size_t lo = 0, hi = train_ds.size();
                while (lo < hi) {  // smallest prefix whose affected share reaches f
                    const std::size_t mid = lo + (hi - lo) / 2;
                    if (static_cast<double>(affected_count(mid)) / total_batches >= f)
                        hi = mid;
                    else
                        lo = mid + 1;
                }
                SweepPoint pt;
                pt.fraction = f;
                if (lo == 0) {
                    pt.affected_pct = 0.0;
                    pt.retained_amnesiac = pt.retained_partial = accuracy(trained, train_ds);
                } else {
                    const std::vector<std::uint64_t> prefix(
                        order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
                    const auto b_t = affected_batches(full, prefix);
                    pt.affected_pct = static_cast<double>(b_t.size()) / total_batches;
                    const SplitPair sp = split_target(train_ds, prefix);
                    pt.retained_amnesiac =
                        accuracy(amnesiac_unlearn(trained, full, b_t, false)[0], sp.retained);
                    pt.retained_partial = accuracy(
                        partial_amnesiac_unlearn(trained, pruned, b_t, false)[0], sp.retained);
                }
                points[i] = pt;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_err) first_err = std::current_exception();
        }
    };

    if (n_threads == 1) {
        worker(0);
    } else {
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (std::thread& th : pool) th.join();
    }
    if (first_err) std::rethrow_exception(first_err);
    return points;
}

Dataset build_train_dataset(const RunConfig& cfg) {
    if (!cfg.synthetic) return load_idx(cfg.data_images, cfg.data_labels);
    // Train and eval samples come from one generation so they share the class
    // structure; the eval tail is split off by build_eval_dataset.
    Dataset all = synth_dataset(cfg.synth_n + cfg.synth_eval_n, cfg.synth_classes, cfg.synth_h,
                                cfg.synth_w, cfg.data_seed());
    return take_rows(all, 0, cfg.synth_n);
}

Dataset build_eval_dataset(const RunConfig& cfg) {
    if (!cfg.synthetic) {
        if (!cfg.eval_images.empty() && !cfg.eval_labels.empty())
            return load_idx(cfg.eval_images, cfg.eval_labels);
        return load_idx(cfg.data_images, cfg.data_labels);
    }
    Dataset all = synth_dataset(cfg.synth_n + cfg.synth_eval_n, cfg.synth_classes, cfg.synth_h,
                                cfg.synth_w, cfg.data_seed());
    return take_rows(all, cfg.synth_n, cfg.synth_eval_n);
}

SplitPair split_by_config(const RunConfig& cfg, const Dataset& ds) {
    if (!cfg.target_ids.empty()) return split_target(ds, cfg.target_ids);
    return split_target(ds, cfg.target_class);
}

UnlearnResult run_unlearn(const RunConfig& cfg, const ModelParams& w, const Ledger& ledger,
                          const SplitPair& split) {
    const UnlearnConfig& ucfg = cfg.unlearn;
    switch (ucfg.algorithm) {
        case UnlearnAlgorithm::amnesiac:
        case UnlearnAlgorithm::partial_amnesiac: {
            const auto b_t = affected_batches(ledger, split.targeted.sample_ids);
            const std::vector<ModelParams> stages =
                ucfg.algorithm == UnlearnAlgorithm::amnesiac
                    ? amnesiac_unlearn(w, ledger, b_t, ucfg.staged)
                    : partial_amnesiac_unlearn(w, ledger, b_t, ucfg.staged);
            UnlearnResult res;
            res.trajectory.push_back(
                {0, accuracy(w, split.targeted), accuracy(w, split.retained)});
            std::size_t chosen = stages.size() - 1;
            for (std::size_t s = 0; s < stages.size(); ++s) {
                const double t_acc = accuracy(stages[s], split.targeted);
                const double r_acc = accuracy(stages[s], split.retained);
                res.trajectory.push_back({s + 1, t_acc, r_acc});
                if (t_acc <= ucfg.target_accuracy_stop) {
                    chosen = s;
                    break;
                }
            }
            res.params = stages[chosen];
            return res;
        }
        case UnlearnAlgorithm::label_flip:
        case UnlearnAlgorithm::label_flip_partial: {
            const Dataset flipped =
                flip_labels(split.targeted, split.targeted.classes, cfg.unlearn_seed());
            if (ucfg.algorithm == UnlearnAlgorithm::label_flip)
                return label_flip_unlearn(w, flipped, split, ucfg, nullptr);
            const SelectionPlan plan = make_selection_plan(cfg, w.arch);
            return label_flip_unlearn(w, flipped, split, ucfg, &plan);
        }
        case UnlearnAlgorithm::optimization:
            return optimization_unlearn(w, split, ucfg, nullptr);
        case UnlearnAlgorithm::optimization_partial: {
            const SelectionPlan plan = make_selection_plan(cfg, w.arch);
            return optimization_unlearn(w, split, ucfg, &plan);
        }
    }
    throw ConfigError("unknown unlearning algorithm");
}

std::string config_fingerprint(const RunConfig& cfg) {
    std::string text;
    for (const auto& [k, v] : cfg.raw) text += k + "=" + v + "\n";
    return hex64(fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int cmd_train(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const Dataset ds = build_train_dataset(cfg);
    const Architecture arch =
        make_architecture(cfg.arch_name, ds.channels(), ds.height(), ds.width(), ds.classes);
    const BatchPlan plan =
        make_batch_plan(ds, cfg.train.batch_size, cfg.train.epochs, cfg.train_seed());

    PrunePlan prune;
    if (cfg.ledger_mode == LedgerMode::pruned) prune = make_prune_plan(cfg, arch);
    Ledger ledger = make_ledger(arch, cfg.ledger_mode, prune,
                                static_cast<std::uint32_t>(plan.epoch_count()),
                                static_cast<std::uint32_t>(plan.batches_per_epoch()));

    const TrainResult res = train_model(arch, ds, plan, cfg.train, {&ledger}, &std::cout);
    save_checkpoint(out_path(cfg, "init.ckpt"), res.init);
    save_checkpoint(out_path(cfg, "final.ckpt"), res.trained);
    save_ledger(out_path(cfg, "ledger.bin"), ledger);
    std::cout << "wrote " << out_path(cfg, "init.ckpt") << ", " << out_path(cfg, "final.ckpt")
              << ", " << out_path(cfg, "ledger.bin") << "\n";
    return 0;
}

int cmd_unlearn(const RunConfig& cfg, const std::string& checkpoint_path,
                const std::string& ledger_path) {
    ensure_out_dir(cfg);
    const ModelParams w = load_checkpoint(checkpoint_path);
    const Ledger ledger = load_ledger(ledger_path);
    if (arch_fingerprint(w.arch) != ledger.fingerprint)
        throw IntegrityError("checkpoint/ledger fingerprint mismatch");

    const Dataset ds = build_train_dataset(cfg);
    const SplitPair split = split_by_config(cfg, ds);
    const UnlearnResult res = run_unlearn(cfg, w, ledger, split);

    MetricsReport report = membership_inference_report(
        w, res.params, split, res.trajectory,
        ledger.mode == LedgerMode::full ? &ledger : nullptr,
        ledger.mode == LedgerMode::pruned ? &ledger : nullptr);
    report.config = cfg.raw;
    report.config["fingerprint"] = config_fingerprint(cfg);
    report.config["algorithm"] = algorithm_name(cfg.unlearn.algorithm);

    save_checkpoint(out_path(cfg, "unlearned.ckpt"), res.params);
    emit_report(report, out_path(cfg, "report.json"), ReportFormat::json);
    emit_report(report, out_path(cfg, "trajectory.csv"), ReportFormat::csv);
    std::cout << "targeted " << report.before_targeted << " -> " << report.after_targeted
              << ", retained " << report.before_retained << " -> " << report.after_retained
              << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    ensure_out_dir(cfg);
    const ModelParams w = load_checkpoint(checkpoint_path);
    const Dataset ds = build_eval_dataset(cfg);
    const SplitPair split = split_by_config(cfg, ds);

    MetricsReport report = membership_inference_report(w, w, split, {});
    report.config = cfg.raw;
    report.config["fingerprint"] = config_fingerprint(cfg);

    emit_report(report, out_path(cfg, "report.json"), ReportFormat::json);
    std::cout << "targeted " << report.after_targeted << ", retained " << report.after_retained
              << "\n";
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const Dataset ds = build_train_dataset(cfg);
    const Architecture arch =
        make_architecture(cfg.arch_name, ds.channels(), ds.height(), ds.width(), ds.classes);
    const BatchPlan plan =
        make_batch_plan(ds, cfg.train.batch_size, cfg.train.epochs, cfg.train_seed());

    Ledger full = make_ledger(arch, LedgerMode::full, {},
                              static_cast<std::uint32_t>(plan.epoch_count()),
                              static_cast<std::uint32_t>(plan.batches_per_epoch()));
    Ledger pruned = make_ledger(arch, LedgerMode::pruned, make_prune_plan(cfg, arch),
                                static_cast<std::uint32_t>(plan.epoch_count()),
                                static_cast<std::uint32_t>(plan.batches_per_epoch()));

    const TrainResult res = train_model(arch, ds, plan, cfg.train, {&full, &pruned}, &std::cout);
    const std::vector<SweepPoint> points = sweep_affected_batches(
        res.trained, full, pruned, ds, cfg.sweep_fractions, cfg.sweep_seed());

    std::vector<SweepRow> rows;
    for (const SweepPoint& pt : points) {
        rows.push_back({round6(pt.fraction), round6(pt.affected_pct), "amnesiac",
                        round6(pt.retained_amnesiac)});
        rows.push_back({round6(pt.fraction), round6(pt.affected_pct), "partial_amnesiac",
                        round6(pt.retained_partial)});
    }
    emit_sweep_csv(rows, out_path(cfg, "sweep.csv"));
    std::cout << "wrote " << out_path(cfg, "sweep.csv") << " (" << rows.size() << " rows)\n";
    return 0;
}

}  // namespace forgetd
