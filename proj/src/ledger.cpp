#include "forgetd/ledger.hpp"

#include "forgetd/bytes.hpp"
#include "forgetd/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace forgetd {

namespace {

constexpr std::uint16_t kLedgerVersion = 1;

std::uint64_t record_key(std::uint32_t e, std::uint32_t b) {
    return (std::uint64_t(e) << 32) | b;
}

double fraction_for_layer(const PrunePlan& plan, std::size_t l) {
    if (plan.fractions.empty()) throw ConfigError("prune plan has no fractions");
    const double p = plan.fractions.size() == 1 ? plan.fractions[0] : plan.fractions.at(l);
    if (p < 0.0 || p > 1.0) throw ConfigError("prune fraction outside [0,1]");
    return p;
}

bool is_stored_zero(double v) { return std::bit_cast<std::uint64_t>(v) == 0; }

// Sparse entries drop only exact +0.0 bit patterns, so decoding reproduces the
// pruned vector bitwise.
LayerDelta encode_layer(const Vector& v) {
    LayerDelta out;
    const std::size_t size = static_cast<std::size_t>(v.size());
    std::size_t zeros = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) zeros += is_stored_zero(v[i]) ? 1u : 0u;
    if (2 * zeros >= size) {
        out.sparse = true;
        out.idx.reserve(size - zeros);
        out.val.reserve(size - zeros);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!is_stored_zero(v[i])) {
                out.idx.push_back(static_cast<std::uint32_t>(i));
                out.val.push_back(v[i]);
            }
        }
    } else {
        out.dense = v;
    }
    return out;
}

Vector magnitude_mask(double p, const Vector& v) {
    const std::size_t size = static_cast<std::size_t>(v.size());
    const std::size_t z = static_cast<std::size_t>(std::llround(p * static_cast<double>(size)));
    std::vector<std::uint32_t> order(size);
    std::iota(order.begin(), order.end(), 0u);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(z), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double aa = std::abs(v[a]), ab = std::abs(v[b]);
                         return aa != ab ? aa < ab : a < b;
                     });
    Vector mask = Vector::Ones(v.size());
    for (std::size_t k = 0; k < z; ++k) mask[order[k]] = 0.0;
    return mask;
}

}  // namespace

std::vector<double> prune_schedule(std::size_t n_param_layers, double p_first, double p_last) {
    std::vector<double> p(n_param_layers, p_first);
    for (std::size_t l = 0; l + 1 < n_param_layers && n_param_layers > 1; ++l)
        p[l] = p_first + (p_last - p_first) * static_cast<double>(l) /
                             static_cast<double>(n_param_layers - 1);
    if (n_param_layers > 1) p.back() = p_last;
    return p;
}

Ledger make_ledger(const Architecture& arch, LedgerMode mode, const PrunePlan& plan,
                   std::uint32_t epochs, std::uint32_t batches_per_epoch) {
    Ledger led;
    led.fingerprint = arch_fingerprint(arch);
    led.mode = mode;
    led.plan = plan;
    led.epochs = epochs;
    led.batches_per_epoch = batches_per_epoch;
    for (const LayerSpec& l : arch.layers)
        if (l.parameterized()) led.layer_sizes.push_back(l.weight_count() + l.bias_count());
    if (mode == LedgerMode::pruned && plan.fractions.empty())
        throw ConfigError("pruned ledger needs a prune plan");
    return led;
}

Vector make_prune_mask(const PrunePlan& plan, std::size_t layer_index, std::size_t layer_size,
                       const Vector* update_values) {
    const double p = fraction_for_layer(
        plan, plan.strategy == PruneStrategy::global ? 0 : layer_index);
    switch (plan.strategy) {
        case PruneStrategy::random: {
            const std::size_t z =
                static_cast<std::size_t>(std::llround(p * static_cast<double>(layer_size)));
            std::vector<std::uint32_t> order(layer_size);
            std::iota(order.begin(), order.end(), 0u);
            Rng rng(mix_seed(plan.seed, layer_index));
            for (std::size_t i = 0; i < z; ++i)
                std::swap(order[i], order[i + rng.below(layer_size - i)]);
            Vector mask = Vector::Ones(static_cast<Eigen::Index>(layer_size));
            for (std::size_t k = 0; k < z; ++k) mask[order[k]] = 0.0;
            return mask;
        }
        case PruneStrategy::magnitude:
        case PruneStrategy::global: {
            if (update_values == nullptr)
                throw ConfigError("magnitude/global pruning requires update values");
            return magnitude_mask(p, *update_values);
        }
    }
    throw ConfigError("unknown prune strategy");
}

std::vector<Vector> make_prune_masks(const PrunePlan& plan, const std::vector<std::size_t>& sizes,
                                     const ParamShaped* update) {
    std::vector<Vector> masks(sizes.size());
    if (plan.strategy == PruneStrategy::global) {
        if (update == nullptr) throw ConfigError("magnitude/global pruning requires update values");
        const double p = fraction_for_layer(plan, 0);
        std::size_t total = 0;
        for (std::size_t s : sizes) total += s;
        const std::size_t z =
            static_cast<std::size_t>(std::llround(p * static_cast<double>(total)));
        std::vector<std::uint64_t> order(total);  // global index = layer-major position
        std::iota(order.begin(), order.end(), 0ull);
        std::vector<double> mag(total);
        std::size_t off = 0;
        for (std::size_t l = 0; l < sizes.size(); ++l) {
            const Vector& v = (*update)[l].values;
            for (Eigen::Index i = 0; i < v.size(); ++i) mag[off++] = std::abs(v[i]);
        }
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(z),
                         order.end(), [&](std::uint64_t a, std::uint64_t b) {
                             return mag[a] != mag[b] ? mag[a] < mag[b] : a < b;
                         });
        for (std::size_t l = 0; l < sizes.size(); ++l)
            masks[l] = Vector::Ones(static_cast<Eigen::Index>(sizes[l]));
        std::vector<std::size_t> starts(sizes.size() + 1, 0);
        for (std::size_t l = 0; l < sizes.size(); ++l) starts[l + 1] = starts[l] + sizes[l];
        for (std::size_t k = 0; k < z; ++k) {
            const std::uint64_t g = order[k];
            const std::size_t l = static_cast<std::size_t>(
                std::upper_bound(starts.begin(), starts.end(), g) - starts.begin() - 1);
            masks[l][static_cast<Eigen::Index>(g - starts[l])] = 0.0;
        }
        return masks;
    }
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        const Vector* vals = update ? &(*update)[l].values : nullptr;
        masks[l] = make_prune_mask(plan, l, sizes[l], vals);
    }
    return masks;
}

Vector apply_mask(const Vector& delta_layer, const Vector& mask_layer) {
    if (delta_layer.size() != mask_layer.size())
        throw InputError("mask/delta size mismatch: " + std::to_string(mask_layer.size()) +
                         " vs " + std::to_string(delta_layer.size()));
    // select, not multiply: 0 * (-x) would introduce -0.0 and break bitwise
    // zero-prune equivalence.
    return (mask_layer.array() != 0.0).select(delta_layer, 0.0);
}

void record_update(Ledger& ledger, std::uint32_t epoch, std::uint32_t batch,
                   std::vector<std::uint64_t> member_ids, const ParamShaped& delta) {
    if (delta.size() != ledger.layer_sizes.size())
        throw InputError("delta layer count does not match ledger");
    const std::uint64_t key = record_key(epoch, batch);
    if (!ledger.seen.insert(key).second)
        throw IntegrityError("duplicate update record (" + std::to_string(epoch) + "," +
                             std::to_string(batch) + ")");

    UpdateRecord rec;
    rec.epoch = epoch;
    rec.batch = batch;
    rec.member_ids = std::move(member_ids);
    rec.layers.reserve(delta.size());
    if (ledger.mode == LedgerMode::pruned) {
        const std::vector<Vector> masks = make_prune_masks(ledger.plan, ledger.layer_sizes, &delta);
        for (std::size_t l = 0; l < delta.size(); ++l)
            rec.layers.push_back(encode_layer(apply_mask(delta[l].values, masks[l])));
    } else {
        for (std::size_t l = 0; l < delta.size(); ++l)
            rec.layers.push_back(encode_layer(delta[l].values));
    }
    ledger.records.push_back(std::move(rec));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> affected_batches(
    const Ledger& ledger, const std::vector<std::uint64_t>& target_ids) {
    std::unordered_set<std::uint64_t> wanted(target_ids.begin(), target_ids.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const UpdateRecord& rec : ledger.records) {
        for (std::uint64_t id : rec.member_ids) {
            if (wanted.count(id)) {
                out.emplace_back(rec.epoch, rec.batch);
                break;
            }
        }
    }
    return out;
}

Vector decode_layer(const LayerDelta& layer, std::size_t size) {
    if (!layer.sparse) {
        if (static_cast<std::size_t>(layer.dense.size()) != size)
            throw IntegrityError("dense layer payload has wrong size");
        return layer.dense;
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(size));
    for (std::size_t k = 0; k < layer.idx.size(); ++k) {
        if (layer.idx[k] >= size) throw IntegrityError("sparse index out of range");
        v[static_cast<Eigen::Index>(layer.idx[k])] = layer.val[k];
    }
    return v;
}

ParamShaped sum_updates(const Ledger& ledger,
                        const std::vector<std::pair<std::uint32_t, std::uint32_t>>& batch_set) {
    std::unordered_set<std::uint64_t> wanted;
    for (auto [e, b] : batch_set) {
        const std::uint64_t key = record_key(e, b);
        if (!ledger.seen.count(key))
            throw InputError("unknown update record (" + std::to_string(e) + "," +
                             std::to_string(b) + ")");
        wanted.insert(key);
    }

    ParamShaped sum(ledger.layer_sizes.size());
    for (std::size_t l = 0; l < sum.size(); ++l) {
        sum[l].weight_count = ledger.layer_sizes[l];
        sum[l].bias_count = 0;
        sum[l].values = Vector::Zero(static_cast<Eigen::Index>(ledger.layer_sizes[l]));
    }
    for (const UpdateRecord& rec : ledger.records) {
        if (!wanted.count(record_key(rec.epoch, rec.batch))) continue;
        for (std::size_t l = 0; l < rec.layers.size(); ++l) {
            const LayerDelta& ld = rec.layers[l];
            if (ld.sparse) {
                for (std::size_t k = 0; k < ld.idx.size(); ++k)
                    sum[l].values[static_cast<Eigen::Index>(ld.idx[k])] += ld.val[k];
            } else {
                sum[l].values += ld.dense;
            }
        }
    }
    return sum;
}

std::uint64_t ledger_size_bytes(const Ledger& ledger) {
    std::uint64_t n = 4 + 2 + 32 + 1;  // magic, version, fingerprint, mode
    if (ledger.mode == LedgerMode::pruned)
        n += 1 + 8 + 4 + 8 * ledger.plan.fractions.size();  // strategy, seed, fractions
    n += 4 + 4;                                             // E, B
    n += 4 + 4 * ledger.layer_sizes.size();                 // layer sizes
    n += 4;                                                 // record count
    for (const UpdateRecord& rec : ledger.records) {
        n += 4 + 4 + 4 + 8 * rec.member_ids.size();
        for (std::size_t l = 0; l < rec.layers.size(); ++l) {
            n += 1;
            if (rec.layers[l].sparse)
                n += 4 + 12 * rec.layers[l].idx.size();
            else
                n += 8 * ledger.layer_sizes[l];
        }
    }
    return n;
}

std::vector<std::uint8_t> serialize_ledger(const Ledger& ledger) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'F', 'G', 'T', 'L'});
    put_u16(out, kLedgerVersion);
    out.insert(out.end(), ledger.fingerprint.begin(), ledger.fingerprint.end());
    out.push_back(static_cast<std::uint8_t>(ledger.mode));
    if (ledger.mode == LedgerMode::pruned) {
        out.push_back(static_cast<std::uint8_t>(ledger.plan.strategy));
        put_u64(out, ledger.plan.seed);
        put_u32(out, static_cast<std::uint32_t>(ledger.plan.fractions.size()));
        for (double p : ledger.plan.fractions) put_f64(out, p);
    }
    put_u32(out, ledger.epochs);
    put_u32(out, ledger.batches_per_epoch);
    put_u32(out, static_cast<std::uint32_t>(ledger.layer_sizes.size()));
    for (std::size_t s : ledger.layer_sizes) put_u32(out, static_cast<std::uint32_t>(s));
    put_u32(out, static_cast<std::uint32_t>(ledger.records.size()));
    for (const UpdateRecord& rec : ledger.records) {
        put_u32(out, rec.epoch);
        put_u32(out, rec.batch);
        put_u32(out, static_cast<std::uint32_t>(rec.member_ids.size()));
        for (std::uint64_t id : rec.member_ids) put_u64(out, id);
        for (std::size_t l = 0; l < rec.layers.size(); ++l) {
            const LayerDelta& ld = rec.layers[l];
            out.push_back(ld.sparse ? 1 : 0);
            if (ld.sparse) {
                put_u32(out, static_cast<std::uint32_t>(ld.idx.size()));
                for (std::size_t k = 0; k < ld.idx.size(); ++k) {
                    put_u32(out, ld.idx[k]);
                    put_f64(out, ld.val[k]);
                }
            } else {
                for (Eigen::Index i = 0; i < ld.dense.size(); ++i) put_f64(out, ld.dense[i]);
            }
        }
    }
    return out;
}

Ledger deserialize_ledger(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "ledger");
    const std::uint8_t* magic = r.take(4);
    if (std::memcmp(magic, "FGTL", 4) != 0) throw IntegrityError("bad ledger magic");
    const std::uint16_t version = r.u16();
    if (version != kLedgerVersion)
        throw IntegrityError("unsupported ledger version " + std::to_string(version));

    Ledger led;
    const std::uint8_t* fp = r.take(32);
    std::copy(fp, fp + 32, led.fingerprint.begin());
    const std::uint8_t mode = r.u8();
    if (mode > 1) throw IntegrityError("unknown ledger mode " + std::to_string(mode));
    led.mode = static_cast<LedgerMode>(mode);
    if (led.mode == LedgerMode::pruned) {
        const std::uint8_t strat = r.u8();
        if (strat > 2) throw IntegrityError("unknown prune strategy " + std::to_string(strat));
        led.plan.strategy = static_cast<PruneStrategy>(strat);
        led.plan.seed = r.u64();
        const std::uint32_t nf = r.u32();
        if (nf > r.remaining() / 8) throw IntegrityError("implausible prune fraction count");
        led.plan.fractions.resize(nf);
        for (std::uint32_t i = 0; i < nf; ++i) led.plan.fractions[i] = r.f64();
    }
    led.epochs = r.u32();
    led.batches_per_epoch = r.u32();
    const std::uint32_t n_layers = r.u32();
    if (n_layers > r.remaining() / 4) throw IntegrityError("implausible ledger layer count");
    led.layer_sizes.resize(n_layers);
    for (std::uint32_t l = 0; l < n_layers; ++l) led.layer_sizes[l] = r.u32();

    const std::uint32_t n_records = r.u32();
    led.records.reserve(std::min<std::size_t>(n_records, r.remaining() / 12 + 1));
    for (std::uint32_t k = 0; k < n_records; ++k) {
        try {
            UpdateRecord rec;
            rec.epoch = r.u32();
            rec.batch = r.u32();
            const std::uint32_t nid = r.u32();
            if (nid > r.remaining() / 8) throw IntegrityError("implausible member id count");
            rec.member_ids.resize(nid);
            for (std::uint32_t i = 0; i < nid; ++i) rec.member_ids[i] = r.u64();
            rec.layers.resize(n_layers);
            for (std::uint32_t l = 0; l < n_layers; ++l) {
                const std::uint8_t enc = r.u8();
                if (enc > 1)
                    throw IntegrityError("unknown layer encoding " + std::to_string(enc));
                LayerDelta& ld = rec.layers[l];
                ld.sparse = enc == 1;
                if (ld.sparse) {
                    const std::uint32_t nz = r.u32();
                    if (nz > r.remaining() / 12 || nz > led.layer_sizes[l])
                        throw IntegrityError("implausible sparse entry count");
                    ld.idx.resize(nz);
                    ld.val.resize(nz);
                    std::uint32_t prev = 0;
                    for (std::uint32_t i = 0; i < nz; ++i) {
                        ld.idx[i] = r.u32();
                        ld.val[i] = r.f64();
                        if (ld.idx[i] >= led.layer_sizes[l] || (i > 0 && ld.idx[i] <= prev))
                            throw IntegrityError("sparse indices not strictly increasing");
                        prev = ld.idx[i];
                    }
                } else {
                    if (led.layer_sizes[l] > r.remaining() / 8)
                        throw IntegrityError("implausible dense layer size");
                    ld.dense = Vector::Zero(static_cast<Eigen::Index>(led.layer_sizes[l]));
                    for (Eigen::Index i = 0; i < ld.dense.size(); ++i) ld.dense[i] = r.f64();
                }
            }
            if (!led.seen.insert(record_key(rec.epoch, rec.batch)).second)
                throw IntegrityError("duplicate update record in file");
            led.records.push_back(std::move(rec));
        } catch (const IntegrityError& err) {
            throw IntegrityError("record " + std::to_string(k) + ": " + err.what());
        }
    }
    if (!r.exhausted()) throw IntegrityError("trailing bytes after ledger payload");
    return led;
}

void save_ledger(const std::string& path, const Ledger& ledger) {
    write_binary_file(path, serialize_ledger(ledger));
}

Ledger load_ledger(const std::string& path) {
    return deserialize_ledger(read_binary_file(path));
}

}  // namespace forgetd
