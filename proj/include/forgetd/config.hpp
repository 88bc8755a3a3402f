#pragma once

#include "forgetd/ledger.hpp"
#include "forgetd/unlearn.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace forgetd {

// Everything a command needs, parsed from a flat dotted-key file. The master
// seed derives per-stage sub-seeds so one knob reseeds the whole pipeline.
struct RunConfig {
    // dataset source: IDX paths or the synthetic corpus (exactly one required)
    std::string data_images;
    std::string data_labels;
    std::string eval_images;
    std::string eval_labels;
    bool synthetic = false;
    std::size_t synth_n = 10000;
    std::size_t synth_eval_n = 2000;
    std::uint32_t synth_classes = 10;
    std::size_t synth_h = 28;
    std::size_t synth_w = 28;

    std::string arch_name = "mlp";  // mlp | convnet

    TrainConfig train;
    LedgerMode ledger_mode = LedgerMode::full;
    PruneStrategy prune_strategy = PruneStrategy::random;
    double prune_first = 0.9;
    double prune_last = 0.1;

    UnlearnConfig unlearn;
    bool select_defaults = true;  // derive q schedule from the algorithm
    double select_first = 0.9;
    double select_last = 0.1;
    std::size_t select_stride = 1;

    std::uint32_t target_class = 3;
    std::vector<std::uint64_t> target_ids;  // when nonempty, overrides target_class

    std::vector<double> sweep_fractions = {0.1, 0.25, 0.5, 0.75, 1.0};

    std::string out_dir = ".";
    std::uint64_t seed = 42;

    std::map<std::string, std::string> raw;  // parsed keys, echoed into reports

    std::uint64_t train_seed() const;
    std::uint64_t data_seed() const;
    std::uint64_t prune_seed() const;
    std::uint64_t unlearn_seed() const;
    std::uint64_t sweep_seed() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Helpers shared by the commands.
Architecture make_architecture(const std::string& name, std::size_t channels, std::size_t h,
                               std::size_t w, std::uint32_t classes);
PrunePlan make_prune_plan(const RunConfig& cfg, const Architecture& arch);
SelectionPlan make_selection_plan(const RunConfig& cfg, const Architecture& arch);
UnlearnAlgorithm parse_algorithm(const std::string& name);
std::string algorithm_name(UnlearnAlgorithm a);

}  // namespace forgetd
