#pragma once

#include "forgetd/nn.hpp"
#include "forgetd/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace forgetd {

// A labeled image set. sample_ids are stable across splits, so a subset keeps
// the ids it had in the parent set.
struct Dataset {
    Tensor images;  // n x channels x h x w
    std::vector<std::uint32_t> labels;
    std::vector<std::uint64_t> sample_ids;
    std::uint32_t classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t channels() const { return images.shape[1]; }
    std::size_t height() const { return images.shape[2]; }
    std::size_t width() const { return images.shape[3]; }
};

struct SplitPair {
    Dataset targeted;
    Dataset retained;
};

// Frozen before training: plan.epochs[e][b] lists the sample ids of batch b.
struct BatchPlan {
    std::vector<std::vector<std::vector<std::uint64_t>>> epochs;

    std::size_t epoch_count() const { return epochs.size(); }
    std::size_t batches_per_epoch() const { return epochs.empty() ? 0 : epochs[0].size(); }
};

Dataset load_idx(const std::string& images_path, const std::string& labels_path);

Dataset synth_dataset(std::size_t n, std::uint32_t classes, std::size_t h, std::size_t w,
                      std::uint64_t seed);

SplitPair split_target(const Dataset& ds, std::uint32_t target_class);
SplitPair split_target(const Dataset& ds, const std::vector<std::uint64_t>& target_ids);

BatchPlan make_batch_plan(const Dataset& ds, std::size_t batch_size, std::size_t epochs,
                          std::uint64_t seed);

// Reassigns every label uniformly among the other classes; images and ids pass
// through untouched.
Dataset flip_labels(const Dataset& targeted, std::uint32_t classes, std::uint64_t seed);

// Contiguous row subset keeping labels and sample ids.
Dataset take_rows(const Dataset& ds, std::size_t row_begin, std::size_t count);

using IdIndex = std::unordered_map<std::uint64_t, std::size_t>;
IdIndex id_index(const Dataset& ds);

Batch make_batch(const Dataset& ds, const std::vector<std::uint64_t>& ids, const IdIndex& index);
Batch slice_batch(const Dataset& ds, std::size_t row_begin, std::size_t row_end);

}  // namespace forgetd
