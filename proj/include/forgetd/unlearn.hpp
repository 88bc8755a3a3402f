#pragma once

#include "forgetd/data.hpp"
#include "forgetd/eval.hpp"
#include "forgetd/ledger.hpp"
#include "forgetd/nn.hpp"

#include <cstdint>
#include <vector>

namespace forgetd {

enum class UnlearnAlgorithm {
    amnesiac,
    partial_amnesiac,
    label_flip,
    label_flip_partial,
    optimization,
    optimization_partial,
};

struct SelectionPlan {
    std::vector<double> fractions;  // q_l per parameterized layer
    std::size_t stride = 1;         // circular-shift step per epoch
};

// Front-loaded (q_first > q_last) suits label flipping, which wants most of
// its updates in the early layers; back-loaded suits loss maximization.
std::vector<double> selection_schedule(std::size_t n_param_layers, double q_first, double q_last);

struct UnlearnConfig {
    UnlearnAlgorithm algorithm = UnlearnAlgorithm::amnesiac;
    double learning_rate = 0.001;       // alpha'
    std::size_t max_epochs = 10;        // E'
    double target_accuracy_stop = 0.005;  // tau
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    bool staged = false;        // amnesiac family only
    bool redraw_flips = false;  // re-draw flipped labels each epoch
};

struct UnlearnResult {
    ModelParams params;
    std::vector<TrajectoryPoint> trajectory;
};

// Both return one model per stage: a single element when staged=false, one per
// training epoch when staged=true (cumulative subtraction).
std::vector<ModelParams> amnesiac_unlearn(
    const ModelParams& w, const Ledger& ledger,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& affected, bool staged);

std::vector<ModelParams> partial_amnesiac_unlearn(
    const ModelParams& w, const Ledger& ledger,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& affected, bool staged);

Vector make_selection_mask(const SelectionPlan& plan, std::size_t layer_index,
                           std::size_t layer_size, std::size_t epoch);

ParamShaped partial_gradient(const ParamShaped& grads, const std::vector<Vector>& masks);

// split.targeted carries the true labels (for the stopping rule and the
// trajectory); `flipped` is the same samples with labels already reassigned.
UnlearnResult label_flip_unlearn(const ModelParams& w, const Dataset& flipped,
                                 const SplitPair& split, const UnlearnConfig& cfg,
                                 const SelectionPlan* plan = nullptr);

UnlearnResult optimization_unlearn(const ModelParams& w, const SplitPair& split,
                                   const UnlearnConfig& cfg, const SelectionPlan* plan = nullptr);

}  // namespace forgetd
