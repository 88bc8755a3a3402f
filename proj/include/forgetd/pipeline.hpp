#pragma once

#include "forgetd/checkpoint.hpp"
#include "forgetd/config.hpp"
#include "forgetd/data.hpp"
#include "forgetd/eval.hpp"
#include "forgetd/ledger.hpp"
#include "forgetd/unlearn.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace forgetd {

struct TrainResult {
    ModelParams init;
    ModelParams trained;
    std::vector<double> epoch_losses;
};

// Single-threaded SGD over the frozen plan; every step's delta is appended to
// every recorder, so one run can produce a full and a pruned ledger at once.
TrainResult train_model(const Architecture& arch, const Dataset& ds, const BatchPlan& plan,
                        const TrainConfig& cfg, const std::vector<Ledger*>& recorders,
                        std::ostream* log = nullptr);

struct SweepPoint {
    double fraction = 0.0;
    double affected_pct = 0.0;
    double retained_amnesiac = 0.0;
    double retained_partial = 0.0;
};

// For each requested fraction, binary-searches a random-prefix target set
// whose affected-batch share reaches it, then applies both amnesiac variants
// from the same trained model. FORGETD_THREADS caps point parallelism.
std::vector<SweepPoint> sweep_affected_batches(const ModelParams& trained, const Ledger& full,
                                               const Ledger& pruned, const Dataset& train_ds,
                                               const std::vector<double>& fractions,
                                               std::uint64_t seed);

Dataset build_train_dataset(const RunConfig& cfg);
Dataset build_eval_dataset(const RunConfig& cfg);
SplitPair split_by_config(const RunConfig& cfg, const Dataset& ds);

// Applies the configured algorithm; returns the post-unlearning model and the
// per-epoch (or per-stage) trajectory.
UnlearnResult run_unlearn(const RunConfig& cfg, const ModelParams& w, const Ledger& ledger,
                          const SplitPair& split);

std::string config_fingerprint(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg);
int cmd_unlearn(const RunConfig& cfg, const std::string& checkpoint_path,
                const std::string& ledger_path);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path);
int cmd_sweep(const RunConfig& cfg);

}  // namespace forgetd
