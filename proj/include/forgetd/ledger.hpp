#pragma once

#include "forgetd/checkpoint.hpp"
#include "forgetd/nn.hpp"

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace forgetd {

enum class PruneStrategy : std::uint8_t { random = 0, magnitude = 1, global = 2 };

struct PrunePlan {
    PruneStrategy strategy = PruneStrategy::random;
    std::vector<double> fractions;  // p_l per parameterized layer; global uses fractions[0]
    std::uint64_t seed = 0;
};

// Linear decay from p_first at the first parameterized layer to p_last at the
// final one, matching the default depth schedule.
std::vector<double> prune_schedule(std::size_t n_param_layers, double p_first = 0.9,
                                   double p_last = 0.1);

enum class LedgerMode : std::uint8_t { full = 0, pruned = 1 };

struct LayerDelta {
    bool sparse = false;
    Vector dense;                     // used when !sparse
    std::vector<std::uint32_t> idx;   // used when sparse
    std::vector<double> val;
};

struct UpdateRecord {
    std::uint32_t epoch = 0;
    std::uint32_t batch = 0;
    std::vector<std::uint64_t> member_ids;
    std::vector<LayerDelta> layers;
};

struct Ledger {
    Fingerprint fingerprint{};
    LedgerMode mode = LedgerMode::full;
    PrunePlan plan;  // meaningful only in pruned mode
    std::uint32_t epochs = 0;
    std::uint32_t batches_per_epoch = 0;
    std::vector<std::size_t> layer_sizes;
    std::vector<UpdateRecord> records;

    std::unordered_set<std::uint64_t> seen;  // (e,b) keys, duplicate guard
};

Ledger make_ledger(const Architecture& arch, LedgerMode mode, const PrunePlan& plan,
                   std::uint32_t epochs, std::uint32_t batches_per_epoch);

// Mask entries are 0/1. Random masks depend only on (plan.seed, l) and stay
// fixed for a whole run; magnitude and global masks depend on the update.
Vector make_prune_mask(const PrunePlan& plan, std::size_t layer_index, std::size_t layer_size,
                       const Vector* update_values = nullptr);

// Masks for every layer of one update; this is the only granularity at which
// the global strategy is well defined (one threshold across the whole update).
std::vector<Vector> make_prune_masks(const PrunePlan& plan, const std::vector<std::size_t>& sizes,
                                     const ParamShaped* update = nullptr);

Vector apply_mask(const Vector& delta_layer, const Vector& mask_layer);

void record_update(Ledger& ledger, std::uint32_t epoch, std::uint32_t batch,
                   std::vector<std::uint64_t> member_ids, const ParamShaped& delta);

std::vector<std::pair<std::uint32_t, std::uint32_t>> affected_batches(
    const Ledger& ledger, const std::vector<std::uint64_t>& target_ids);

ParamShaped sum_updates(const Ledger& ledger,
                        const std::vector<std::pair<std::uint32_t, std::uint32_t>>& batch_set);

Vector decode_layer(const LayerDelta& layer, std::size_t size);

std::uint64_t ledger_size_bytes(const Ledger& ledger);

std::vector<std::uint8_t> serialize_ledger(const Ledger& ledger);
Ledger deserialize_ledger(const std::vector<std::uint8_t>& bytes);

void save_ledger(const std::string& path, const Ledger& ledger);
Ledger load_ledger(const std::string& path);

}  // namespace forgetd
