#include "forgetd/data.hpp"

#include "forgetd/rng.hpp"

#include <Eigen/QR>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace forgetd {

namespace {

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& raw,
                                       const std::string& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib init failed for " + path);
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 18);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw InputError("corrupt gzip stream in " + path);
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> buf(std::istreambuf_iterator<char>(in), {});
    if (buf.size() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b) return inflate_gzip(buf, path);
    return buf;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off,
                        const std::string& path) {
    if (off + 4 > buf.size()) throw InputError("truncated header in " + path);
    return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
           (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

Dataset subset_by_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.classes = ds.classes;
    const std::size_t per = ds.images.size() / std::max<std::size_t>(1, ds.size());
    out.images = Tensor::zeros({rows.size(), ds.channels(), ds.height(), ds.width()});
    out.labels.reserve(rows.size());
    out.sample_ids.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = rows[k];
        out.images.data.segment(static_cast<Eigen::Index>(k * per),
                                static_cast<Eigen::Index>(per)) =
            ds.images.data.segment(static_cast<Eigen::Index>(r * per),
                                   static_cast<Eigen::Index>(per));
        out.labels.push_back(ds.labels[r]);
        out.sample_ids.push_back(ds.sample_ids[r]);
    }
    return out;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<std::uint8_t> ibuf = read_file(images_path);
    const std::vector<std::uint8_t> lbuf = read_file(labels_path);

    if (read_be32(ibuf, 0, images_path) != 0x00000803u)
        throw InputError("expected image magic 0x00000803 in " + images_path);
    if (read_be32(lbuf, 0, labels_path) != 0x00000801u)
        throw InputError("expected label magic 0x00000801 in " + labels_path);

    const std::size_t n = read_be32(ibuf, 4, images_path);
    const std::size_t h = read_be32(ibuf, 8, images_path);
    const std::size_t w = read_be32(ibuf, 12, images_path);
    const std::size_t ln = read_be32(lbuf, 4, labels_path);
    if (n != ln)
        throw InputError("image/label count mismatch: " + std::to_string(n) + " vs " +
                         std::to_string(ln));
    if (ibuf.size() < 16 + n * h * w) throw InputError("truncated image payload in " + images_path);
    if (lbuf.size() < 8 + n) throw InputError("truncated label payload in " + labels_path);

    Dataset ds;
    ds.images = Tensor::zeros({n, 1, h, w});
    ds.labels.resize(n);
    ds.sample_ids.resize(n);
    std::uint32_t max_label = 0;
    for (std::size_t i = 0; i < n * h * w; ++i)
        ds.images.data[static_cast<Eigen::Index>(i)] = static_cast<double>(ibuf[16 + i]) / 255.0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = lbuf[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
        ds.sample_ids[i] = i;
    }
    ds.classes = max_label + 1;
    return ds;
}

Dataset synth_dataset(std::size_t n, std::uint32_t classes, std::size_t h, std::size_t w,
                      std::uint64_t seed) {
    if (classes < 1 || n < classes) throw InputError("synthetic dataset needs n >= classes >= 1");
    const std::size_t d = h * w;
    const std::size_t frame = classes == 10 ? 9 : classes;
    const std::size_t latent = std::max<std::size_t>(12, frame);

    // Class means are built from a fixed orthonormal frame, independent of
    // `seed`, so the confusion structure between classes is a stable property
    // of the generator; the pixel embedding, sample noise and shuffles are
    // what vary from seed to seed.
    Matrix raw(static_cast<Eigen::Index>(latent), static_cast<Eigen::Index>(frame));
    Rng frame_rng(42);
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
        for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, j) = frame_rng.normal();
    const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() *
                     Matrix::Identity(raw.rows(), raw.cols());

    const double scale = 3.0;
    Matrix mu = Matrix::Zero(static_cast<Eigen::Index>(latent), classes);
    Vector within = Vector::Constant(classes, 0.5);
    std::vector<std::uint32_t> pattern;
    if (classes == 10) {
        // Digit-like confusion geometry: 3 sits between 5 and 8 with a thin
        // margin and a slightly smaller share of the data, 1/7 and 4/9 form
        // close pairs, the remaining digits stand alone. That spread of
        // per-class margins mirrors how real digit classes behave.
        const double gap = 1.2, pair_off = 1.6;
        mu.col(0) = scale * q.col(0);
        mu.col(1) = scale * q.col(1);
        mu.col(2) = scale * q.col(2);
        mu.col(5) = scale * q.col(3);
        mu.col(4) = scale * q.col(4);
        mu.col(6) = scale * q.col(5);
        mu.col(8) = mu.col(5) + gap * q.col(6);
        mu.col(3) = mu.col(5) + 0.5 * gap * q.col(6);
        mu.col(7) = mu.col(1) + pair_off * q.col(7);
        mu.col(9) = mu.col(4) + pair_off * q.col(8);
        within[3] = 0.22;
        within[5] = within[8] = 0.40;
        within[1] = within[7] = within[4] = within[9] = 0.45;
        pattern.resize(100);
        for (std::size_t i = 0; i < pattern.size(); ++i)
            pattern[i] = static_cast<std::uint32_t>(i % 10);
        pattern[13] = 5;
        pattern[53] = 8;
    } else {
        for (std::uint32_t c = 0; c < classes; ++c) mu.col(c) = scale * q.col(c);
        pattern.resize(classes);
        for (std::uint32_t c = 0; c < classes; ++c) pattern[c] = c;
    }

    const double amp = 0.5;
    const double noise = 0.25;

    // The latent-to-pixel basis is low-rank so classes interfere with each
    // other the way digit strokes share pixels; a linear model still
    // separates them.
    Rng basis_rng(mix_seed(seed, 1));
    Matrix basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(latent));
    for (Eigen::Index j = 0; j < basis.cols(); ++j)
        for (Eigen::Index i = 0; i < basis.rows(); ++i)
            basis(i, j) = basis_rng.normal() / std::sqrt(static_cast<double>(latent));

    Dataset ds;
    ds.classes = classes;
    ds.images = Tensor::zeros({n, 1, h, w});
    ds.labels.resize(n);
    ds.sample_ids.resize(n);
    Rng sample_rng(mix_seed(seed, 3));
    Vector z(static_cast<Eigen::Index>(latent));
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = pattern[i % pattern.size()];
        ds.labels[i] = c;
        ds.sample_ids[i] = i;
        for (Eigen::Index k = 0; k < z.size(); ++k)
            z[k] = mu(k, c) + within[c] * sample_rng.normal();
        Vector x = 0.5 + (amp * (basis * z)).array();
        for (Eigen::Index k = 0; k < x.size(); ++k)
            x[k] = std::clamp(x[k] + noise * sample_rng.normal(), 0.0, 1.0);
        ds.images.data.segment(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d)) = x;
    }
    return ds;
}

SplitPair split_target(const Dataset& ds, std::uint32_t target_class) {
    if (target_class >= ds.classes)
        throw InputError("empty target: no class " + std::to_string(target_class) +
                         " in a dataset with " + std::to_string(ds.classes) + " classes");
    std::vector<std::size_t> t, r;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (ds.labels[i] == target_class ? t : r).push_back(i);
    if (t.empty())
        throw InputError("empty target: class " + std::to_string(target_class) + " has no samples");
    return {subset_by_rows(ds, t), subset_by_rows(ds, r)};
}

SplitPair split_target(const Dataset& ds, const std::vector<std::uint64_t>& target_ids) {
    std::unordered_map<std::uint64_t, bool> wanted;
    for (std::uint64_t id : target_ids) wanted[id] = true;
    std::vector<std::size_t> t, r;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (wanted.count(ds.sample_ids[i]) ? t : r).push_back(i);
    if (t.empty()) throw InputError("empty target: no listed sample ids are present");
    return {subset_by_rows(ds, t), subset_by_rows(ds, r)};
}

BatchPlan make_batch_plan(const Dataset& ds, std::size_t batch_size, std::size_t epochs,
                          std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    BatchPlan plan;
    plan.epochs.resize(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<std::uint64_t> order = ds.sample_ids;
        Rng rng(mix_seed(seed, e));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, order.size());
            plan.epochs[e].emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                        order.begin() + static_cast<std::ptrdiff_t>(stop));
        }
    }
    return plan;
}

Dataset flip_labels(const Dataset& targeted, std::uint32_t classes, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("label flipping needs at least 2 classes");
    Dataset out = targeted;
    Rng rng(mix_seed(seed, 0x666c6970));  // "flip"
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t old = out.labels[i];
        const std::uint32_t draw = static_cast<std::uint32_t>(rng.below(classes - 1));
        out.labels[i] = draw >= old ? draw + 1 : draw;
    }
    return out;
}

Dataset take_rows(const Dataset& ds, std::size_t row_begin, std::size_t count) {
    if (row_begin + count > ds.size()) throw InputError("row range outside dataset");
    std::vector<std::size_t> rows(count);
    std::iota(rows.begin(), rows.end(), row_begin);
    return subset_by_rows(ds, rows);
}

IdIndex id_index(const Dataset& ds) {
    IdIndex idx;
    idx.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) idx.emplace(ds.sample_ids[i], i);
    return idx;
}

Batch make_batch(const Dataset& ds, const std::vector<std::uint64_t>& ids, const IdIndex& index) {
    const std::size_t per = ds.images.size() / std::max<std::size_t>(1, ds.size());
    Batch b;
    b.inputs = Tensor::zeros({ids.size(), ds.channels(), ds.height(), ds.width()});
    b.one_hot = Matrix::Zero(static_cast<Eigen::Index>(ids.size()),
                             static_cast<Eigen::Index>(ds.classes));
    for (std::size_t k = 0; k < ids.size(); ++k) {
        auto it = index.find(ids[k]);
        if (it == index.end())
            throw InputError("sample id " + std::to_string(ids[k]) + " not in dataset");
        const std::size_t r = it->second;
        b.inputs.data.segment(static_cast<Eigen::Index>(k * per),
                              static_cast<Eigen::Index>(per)) =
            ds.images.data.segment(static_cast<Eigen::Index>(r * per),
                                   static_cast<Eigen::Index>(per));
        b.one_hot(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(ds.labels[r])) = 1.0;
    }
    return b;
}

Batch slice_batch(const Dataset& ds, std::size_t row_begin, std::size_t row_end) {
    const std::size_t per = ds.images.size() / std::max<std::size_t>(1, ds.size());
    const std::size_t n = row_end - row_begin;
    Batch b;
    b.inputs = Tensor::zeros({n, ds.channels(), ds.height(), ds.width()});
    b.inputs.data = ds.images.data.segment(static_cast<Eigen::Index>(row_begin * per),
                                           static_cast<Eigen::Index>(n * per));
    b.one_hot = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.classes));
    for (std::size_t k = 0; k < n; ++k)
        b.one_hot(static_cast<Eigen::Index>(k),
                  static_cast<Eigen::Index>(ds.labels[row_begin + k])) = 1.0;
    return b;
}

}  // namespace forgetd
