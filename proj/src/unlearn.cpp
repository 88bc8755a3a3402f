#include "forgetd/unlearn.hpp"

#include "forgetd/rng.hpp"

#include <cmath>

namespace forgetd {

namespace {

std::vector<ModelParams> amnesiac_impl(
    const ModelParams& w, const Ledger& ledger,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& affected, bool staged) {
    if (arch_fingerprint(w.arch) != ledger.fingerprint)
        throw IntegrityError("ledger fingerprint does not match model architecture");

    std::vector<ModelParams> stages;
    if (!staged) {
        ModelParams cur = w;
        param_axpy(cur, -1, sum_updates(ledger, affected));
        stages.push_back(std::move(cur));
        return stages;
    }
    ModelParams cur = w;
    for (std::uint32_t e = 0; e < ledger.epochs; ++e) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> subset;
        for (const auto& eb : affected)
            if (eb.first == e) subset.push_back(eb);
        if (!subset.empty()) param_axpy(cur, -1, sum_updates(ledger, subset));
        stages.push_back(cur);
    }
    return stages;
}

struct RetrainSpec {
    bool flip = false;     // train on flipped labels (descent) vs true labels (ascent)
    double lr_sign = 1.0;  // +1 descent, -1 ascent
};

UnlearnResult retrain_unlearn(const ModelParams& w, const Dataset& initial_train_on,
                              const SplitPair& split, const UnlearnConfig& cfg,
                              const SelectionPlan* plan, const RetrainSpec& spec) {
    if (initial_train_on.size() == 0) throw InputError("empty targeted set");
    if (plan) {
        if (plan->fractions.size() != w.layers.size())
            throw ConfigError("selection plan has " + std::to_string(plan->fractions.size()) +
                              " fractions for " + std::to_string(w.layers.size()) + " layers");
        for (double q : plan->fractions)
            if (!(q > 0.0 && q <= 1.0)) throw ConfigError("selection fraction outside (0,1]");
    }

    UnlearnResult res;
    res.params = w;
    res.trajectory.push_back(
        {0, accuracy(res.params, split.targeted), accuracy(res.params, split.retained)});

    Dataset train_on = initial_train_on;
    for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
        if (spec.flip && cfg.redraw_flips && e > 0)
            train_on = flip_labels(split.targeted, split.targeted.classes,
                                   mix_seed(cfg.seed ^ 0x666c6970ull, e));

        std::vector<Vector> masks;
        if (plan) {
            masks.resize(w.layers.size());
            for (std::size_t l = 0; l < w.layers.size(); ++l)
                masks[l] = make_selection_mask(
                    *plan, l, static_cast<std::size_t>(w.layers[l].values.size()), e);
        }

        auto step_on = [&](const Batch& batch) {
            LossGrads lg = loss_and_grads(res.params, batch);
            const ParamShaped& grads = plan ? partial_gradient(lg.grads, masks) : lg.grads;
            res.params = sgd_step(res.params, grads, spec.lr_sign * cfg.learning_rate).params;
        };

        if (train_on.size() <= 4096) {
            step_on(slice_batch(train_on, 0, train_on.size()));
        } else {
            const BatchPlan bp =
                make_batch_plan(train_on, cfg.batch_size, 1, mix_seed(cfg.seed, e));
            const IdIndex idx = id_index(train_on);
            for (const auto& ids : bp.epochs[0]) step_on(make_batch(train_on, ids, idx));
        }

        const double t_acc = accuracy(res.params, split.targeted);
        const double r_acc = accuracy(res.params, split.retained);
        res.trajectory.push_back({e + 1, t_acc, r_acc});
        if (t_acc <= cfg.target_accuracy_stop) break;
    }
    return res;
}

}  // namespace

std::vector<double> selection_schedule(std::size_t n_param_layers, double q_first, double q_last) {
    std::vector<double> q(n_param_layers, q_first);
    for (std::size_t l = 0; l + 1 < n_param_layers && n_param_layers > 1; ++l)
        q[l] = q_first + (q_last - q_first) * static_cast<double>(l) /
                             static_cast<double>(n_param_layers - 1);
    if (n_param_layers > 1) q.back() = q_last;
    return q;
}

std::vector<ModelParams> amnesiac_unlearn(
    const ModelParams& w, const Ledger& ledger,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& affected, bool staged) {
    if (ledger.mode != LedgerMode::full)
        throw ConfigError("amnesiac unlearning requires a full-mode ledger");
    return amnesiac_impl(w, ledger, affected, staged);
}

std::vector<ModelParams> partial_amnesiac_unlearn(
    const ModelParams& w, const Ledger& ledger,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& affected, bool staged) {
    if (ledger.mode != LedgerMode::pruned)
        throw ConfigError("partial amnesiac unlearning requires a pruned ledger");
    return amnesiac_impl(w, ledger, affected, staged);
}

Vector make_selection_mask(const SelectionPlan& plan, std::size_t layer_index,
                           std::size_t layer_size, std::size_t epoch) {
    const double q = plan.fractions.size() == 1 ? plan.fractions[0]
                                                : plan.fractions.at(layer_index);
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("selection fraction outside (0,1]");
    const std::size_t ones =
        static_cast<std::size_t>(std::llround(q * static_cast<double>(layer_size)));
    const std::size_t shift = (epoch * plan.stride) % layer_size;
    Vector mask(static_cast<Eigen::Index>(layer_size));
    for (std::size_t i = 0; i < layer_size; ++i) {
        const std::size_t src = (i + layer_size - shift) % layer_size;
        mask[static_cast<Eigen::Index>(i)] = src < ones ? 1.0 : 0.0;
    }
    return mask;
}

ParamShaped partial_gradient(const ParamShaped& grads, const std::vector<Vector>& masks) {
    if (masks.size() != grads.size()) throw InputError("mask count does not match gradient layers");
    ParamShaped out = grads;
    for (std::size_t l = 0; l < grads.size(); ++l)
        out[l].values = apply_mask(grads[l].values, masks[l]);
    return out;
}

UnlearnResult label_flip_unlearn(const ModelParams& w, const Dataset& flipped,
                                 const SplitPair& split, const UnlearnConfig& cfg,
                                 const SelectionPlan* plan) {
    return retrain_unlearn(w, flipped, split, cfg, plan, {.flip = true, .lr_sign = 1.0});
}

UnlearnResult optimization_unlearn(const ModelParams& w, const SplitPair& split,
                                   const UnlearnConfig& cfg, const SelectionPlan* plan) {
    return retrain_unlearn(w, split.targeted, split, cfg, plan, {.flip = false, .lr_sign = -1.0});
}

}  // namespace forgetd
