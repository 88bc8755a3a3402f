#include "forgetd/nn.hpp"

#include "forgetd/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace forgetd {

namespace {

struct ForwardCache {
    // activations[i] is the input to layer i; activations.back() is the output.
    std::vector<Tensor> activations;
    // For each maxpool layer: source flat index (into that layer's input data)
    // chosen for every output element. Ties resolve to the first maximum in
    // row-major scan order.
    std::vector<std::vector<std::int64_t>> pool_src;
};

std::size_t batch_count(const Tensor& inputs) {
    if (inputs.rank() < 2) throw InputError("batch input must have a leading batch axis");
    return inputs.shape[0];
}

void check_input_shape(const Architecture& arch, const Tensor& inputs) {
    const std::size_t per_sample = inputs.size() / std::max<std::size_t>(1, inputs.shape[0]);
    const std::size_t want = arch.in_channels * arch.in_h * arch.in_w;
    if (per_sample != want) {
        std::ostringstream os;
        os << "input sample size " << per_sample << " does not match architecture input "
           << shape_to_string(arch.input_shape());
        throw InputError(os.str());
    }
}

Tensor dense_forward(const LayerSpec& l, const LayerParams& p, const Tensor& x) {
    const std::size_t n = x.shape[0];
    Tensor y = Tensor::zeros({n, l.out});
    auto X = x.as_matrix(n, l.in);
    auto W = p.weights_as(l.in, l.out);
    auto Y = y.as_matrix(n, l.out);
    Y.noalias() = X * W;
    Y.rowwise() += p.biases().transpose();
    return y;
}

Tensor conv_forward(const LayerSpec& l, const LayerParams& p, const Tensor& x) {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t k = l.kernel, s = l.stride, oc = l.out_channels;
    const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
    Tensor y = Tensor::zeros({n, oc, oh, ow});
    const double* in = x.data.data();
    const double* kw = p.values.data();
    const double* kb = p.values.data() + p.weight_count;
    double* out = y.data.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        const double* in_n = in + ni * c * h * w;
        double* out_n = out + ni * oc * oh * ow;
        for (std::size_t o = 0; o < oc; ++o) {
            const double* kw_o = kw + o * c * k * k;
            double* out_o = out_n + o * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = kb[o];
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const double* in_c = in_n + ci * h * w + oy * s * w + ox * s;
                        const double* kw_c = kw_o + ci * k * k;
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j)
                                acc += in_c[i * w + j] * kw_c[i * k + j];
                    }
                    out_o[oy * ow + ox] = acc;
                }
            }
        }
    }
    return y;
}

Tensor pool_forward(const LayerSpec& l, const Tensor& x, std::vector<std::int64_t>& src) {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t v = l.window;
    const std::size_t oh = h / v, ow = w / v;
    Tensor y = Tensor::zeros({n, c, oh, ow});
    src.assign(n * c * oh * ow, 0);
    const double* in = x.data.data();
    double* out = y.data.data();
    std::size_t oi = 0;
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            const std::size_t base = (ni * c + ci) * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox, ++oi) {
                    std::size_t best = base + (oy * v) * w + ox * v;
                    double best_val = in[best];
                    for (std::size_t i = 0; i < v; ++i) {
                        for (std::size_t j = 0; j < v; ++j) {
                            const std::size_t idx = base + (oy * v + i) * w + (ox * v + j);
                            if (in[idx] > best_val) {
                                best_val = in[idx];
                                best = idx;
                            }
                        }
                    }
                    out[oi] = best_val;
                    src[oi] = static_cast<std::int64_t>(best);
                }
            }
        }
    }
    return y;
}

Tensor run_forward(const ModelParams& params, const Tensor& batch_inputs, ForwardCache* cache) {
    const Architecture& arch = params.arch;
    check_input_shape(arch, batch_inputs);
    const std::size_t n = batch_count(batch_inputs);

    Tensor cur = batch_inputs;
    if (cur.rank() != 4) {
        cur.shape = {n, arch.in_channels, arch.in_h, arch.in_w};
    }
    if (cache) {
        cache->activations.clear();
        cache->pool_src.assign(arch.layers.size(), {});
    }

    std::size_t param_idx = 0;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        if (cache) cache->activations.push_back(cur);
        switch (l.kind) {
            case LayerKind::dense: {
                Tensor flat = cur;
                flat.shape = {n, flat.size() / n};
                cur = dense_forward(l, params.layers[param_idx++], flat);
                break;
            }
            case LayerKind::conv2d:
                cur = conv_forward(l, params.layers[param_idx++], cur);
                break;
            case LayerKind::maxpool2d: {
                std::vector<std::int64_t> dummy;
                cur = pool_forward(l, cur, cache ? cache->pool_src[i] : dummy);
                break;
            }
            case LayerKind::relu: {
                Tensor y = cur;
                y.data = cur.data.cwiseMax(0.0);
                cur = std::move(y);
                break;
            }
            case LayerKind::flatten: {
                Tensor y = cur;
                y.shape = {n, cur.size() / n};
                cur = std::move(y);
                break;
            }
        }
    }
    if (cache) cache->activations.push_back(cur);
    if (!cur.all_finite()) throw IntegrityError("forward pass produced non-finite values");
    return cur;
}

void dense_backward(const LayerSpec& l, const LayerParams& p, const Tensor& x, const Tensor& dy,
                    LayerParams& grad, Tensor& dx) {
    const std::size_t n = x.shape[0];
    auto X = x.as_matrix(n, l.in);
    auto DY = dy.as_matrix(n, l.out);
    auto DW = grad.weights_as(l.in, l.out);
    DW.noalias() = X.transpose() * DY;
    grad.biases() = DY.colwise().sum().transpose();
    dx = Tensor::zeros({n, l.in});
    dx.as_matrix(n, l.in).noalias() = DY * p.weights_as(l.in, l.out).transpose();
}

void conv_backward(const LayerSpec& l, const LayerParams& p, const Tensor& x, const Tensor& dy,
                   LayerParams& grad, Tensor& dx) {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t k = l.kernel, s = l.stride, oc = l.out_channels;
    const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
    dx = Tensor::zeros({n, c, h, w});
    const double* in = x.data.data();
    const double* dout = dy.data.data();
    const double* kw = p.values.data();
    double* dkw = grad.values.data();
    double* dkb = grad.values.data() + grad.weight_count;
    double* din = dx.data.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        const double* in_n = in + ni * c * h * w;
        double* din_n = din + ni * c * h * w;
        const double* dout_n = dout + ni * oc * oh * ow;
        for (std::size_t o = 0; o < oc; ++o) {
            const double* dout_o = dout_n + o * oh * ow;
            const double* kw_o = kw + o * c * k * k;
            double* dkw_o = dkw + o * c * k * k;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double g = dout_o[oy * ow + ox];
                    dkb[o] += g;
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const double* in_c = in_n + ci * h * w + oy * s * w + ox * s;
                        double* din_c = din_n + ci * h * w + oy * s * w + ox * s;
                        double* dkw_c = dkw_o + ci * k * k;
                        const double* kw_c = kw_o + ci * k * k;
                        for (std::size_t i = 0; i < k; ++i) {
                            for (std::size_t j = 0; j < k; ++j) {
                                dkw_c[i * k + j] += g * in_c[i * w + j];
                                din_c[i * w + j] += g * kw_c[i * k + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

ModelParams build_model(const Architecture& arch, std::uint64_t seed) {
    arch.output_shapes();  // validates adjacency
    if (arch.layers.empty() || arch.layers.back().kind != LayerKind::dense)
        throw ConfigError("architecture must end in a dense layer");

    ModelParams m;
    m.arch = arch;
    std::size_t ordinal = 0;
    for (const LayerSpec& l : arch.layers) {
        if (!l.parameterized()) continue;
        LayerParams p;
        p.weight_count = l.weight_count();
        p.bias_count = l.bias_count();
        p.values = Vector::Zero(static_cast<Eigen::Index>(p.weight_count + p.bias_count));
        std::size_t fan_in, fan_out;
        if (l.kind == LayerKind::dense) {
            fan_in = l.in;
            fan_out = l.out;
        } else {
            fan_in = l.in_channels * l.kernel * l.kernel;
            fan_out = l.out_channels * l.kernel * l.kernel;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Rng rng(mix_seed(seed, ordinal));
        for (std::size_t i = 0; i < p.weight_count; ++i)
            p.values[static_cast<Eigen::Index>(i)] = rng.uniform(-bound, bound);
        m.layers.push_back(std::move(p));
        ++ordinal;
    }
    return m;
}

Tensor forward(const ModelParams& params, const Tensor& batch_inputs) {
    return run_forward(params, batch_inputs, nullptr);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

LossGrads loss_and_grads(const ModelParams& params, const Batch& batch) {
    const std::size_t n = batch_count(batch.inputs);
    if (n == 0) throw InputError("empty batch");
    const std::size_t classes = params.arch.num_classes();
    if (static_cast<std::size_t>(batch.one_hot.rows()) != n ||
        static_cast<std::size_t>(batch.one_hot.cols()) != classes)
        throw InputError("label matrix shape does not match batch/classes");
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        bool valid = true;
        for (std::size_t c = 0; c < classes; ++c) {
            const double v = batch.one_hot(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(c));
            if (v != 0.0 && v != 1.0) valid = false;
            sum += v;
        }
        if (!valid || sum != 1.0)
            throw InputError("label row " + std::to_string(i) + " is not one-hot");
    }

    ForwardCache cache;
    Tensor logits_t = run_forward(params, batch.inputs, &cache);
    Matrix logits = logits_t.as_matrix(n, classes);
    Matrix probs = softmax_rows(logits);

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
            if (batch.one_hot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) == 1.0) {
                loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(c)),
                                          1e-300));
            }
        }
    }
    loss /= static_cast<double>(n);

    LossGrads out;
    out.loss = loss;
    out.grads = zero_deltas_like(params);

    // dL/dlogits = (softmax - onehot) / n
    Matrix dlogits = (probs - batch.one_hot) / static_cast<double>(n);
    Tensor grad_out = Tensor::zeros({n, classes});
    grad_out.as_matrix(n, classes) = dlogits;

    const Architecture& arch = params.arch;
    std::size_t param_idx = params.layers.size();
    for (std::size_t li = arch.layers.size(); li-- > 0;) {
        const LayerSpec& l = arch.layers[li];
        const Tensor& x = cache.activations[li];
        Tensor dx;
        switch (l.kind) {
            case LayerKind::dense: {
                --param_idx;
                Tensor flat = x;
                flat.shape = {n, x.size() / n};
                dense_backward(l, params.layers[param_idx], flat, grad_out,
                               out.grads[param_idx], dx);
                dx.shape = x.shape;
                break;
            }
            case LayerKind::conv2d: {
                --param_idx;
                conv_backward(l, params.layers[param_idx], x, grad_out, out.grads[param_idx], dx);
                break;
            }
            case LayerKind::maxpool2d: {
                dx = Tensor::zeros(x.shape);
                const std::vector<std::int64_t>& src = cache.pool_src[li];
                for (std::size_t k = 0; k < src.size(); ++k)
                    dx.data[src[k]] += grad_out.data[static_cast<Eigen::Index>(k)];
                break;
            }
            case LayerKind::relu: {
                dx = x;
                dx.data = (x.data.array() > 0.0).select(grad_out.data, 0.0);
                break;
            }
            case LayerKind::flatten: {
                dx = grad_out;
                dx.shape = x.shape;
                break;
            }
        }
        grad_out = std::move(dx);
    }
    return out;
}

SgdStep sgd_step(const ModelParams& params, const ParamShaped& grads, double lr) {
    if (grads.size() != params.layers.size())
        throw InputError("gradient layer count does not match parameters");
    SgdStep step;
    step.params = params;
    step.delta = zero_deltas_like(params);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (grads[i].values.size() != params.layers[i].values.size())
            throw InputError("gradient shape mismatch at layer " + std::to_string(i));
        // delta is the realized floating difference; re-adding it to the old
        // values reproduces the new values bitwise, so recorded updates replay
        // training exactly.
        Vector stepped = params.layers[i].values - lr * grads[i].values;
        step.delta[i].values = stepped - params.layers[i].values;
        step.params.layers[i].values = params.layers[i].values + step.delta[i].values;
    }
    return step;
}

void param_axpy(ModelParams& dst, int sign, const ParamShaped& src) {
    if (src.size() != dst.layers.size())
        throw InputError("layer count mismatch in param_axpy");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].values.size() != dst.layers[i].values.size())
            throw InputError("shape mismatch in param_axpy at layer " + std::to_string(i));
        if (sign >= 0)
            dst.layers[i].values += src[i].values;
        else
            dst.layers[i].values -= src[i].values;
    }
}

ParamShaped zero_deltas_like(const ModelParams& params) {
    ParamShaped d(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        d[i].weight_count = params.layers[i].weight_count;
        d[i].bias_count = params.layers[i].bias_count;
        d[i].values = Vector::Zero(params.layers[i].values.size());
    }
    return d;
}

void accumulate(ParamShaped& dst, const ParamShaped& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].values += src[i].values;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].values.size() != b.layers[i].values.size()) return false;
        if (std::memcmp(a.layers[i].values.data(), b.layers[i].values.data(),
                        sizeof(double) * a.layers[i].values.size()) != 0)
            return false;
    }
    return true;
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        m = std::max(m, (a.layers[i].values - b.layers[i].values).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace forgetd
