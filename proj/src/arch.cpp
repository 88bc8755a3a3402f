#include "forgetd/arch.hpp"

#include "forgetd/tensor.hpp"

#include <sstream>

namespace forgetd {

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::maxpool2d(std::size_t window) {
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.window = window;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

std::size_t LayerSpec::weight_count() const {
    switch (kind) {
        case LayerKind::dense:
            return in * out;
        case LayerKind::conv2d:
            return out_channels * in_channels * kernel * kernel;
        default:
            return 0;
    }
}

std::size_t LayerSpec::bias_count() const {
    switch (kind) {
        case LayerKind::dense:
            return out;
        case LayerKind::conv2d:
            return out_channels;
        default:
            return 0;
    }
}

std::string LayerSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case LayerKind::dense:
            os << "dense " << in << "->" << out;
            break;
        case LayerKind::conv2d:
            os << "conv2d " << in_channels << "->" << out_channels << " k" << kernel << " s"
               << stride;
            break;
        case LayerKind::maxpool2d:
            os << "maxpool2d w" << window;
            break;
        case LayerKind::relu:
            os << "relu";
            break;
        case LayerKind::flatten:
            os << "flatten";
            break;
    }
    return os.str();
}

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
    std::size_t p = 1;
    for (std::size_t d : v) p *= d;
    return p;
}

[[noreturn]] void shape_error(std::size_t got, std::size_t want, std::size_t layer_index,
                              const std::string& prev_desc, const std::string& cur_desc) {
    std::ostringstream os;
    os << "shape mismatch " << got << " vs " << want << " between " << prev_desc << " and layer "
       << layer_index << " (" << cur_desc << ")";
    throw ConfigError(os.str());
}

}  // namespace

std::vector<std::vector<std::size_t>> Architecture::output_shapes() const {
    std::vector<std::vector<std::size_t>> shapes;
    shapes.reserve(layers.size());
    std::vector<std::size_t> cur = input_shape();
    std::string prev_desc = "input " + shape_to_string(cur);

    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerKind::dense: {
                // Dense consumes the flattened sample; anything whose element
                // count matches `in` is compatible.
                const std::size_t got = product(cur);
                if (got != l.in) shape_error(got, l.in, i, prev_desc, l.describe());
                cur = {l.out};
                break;
            }
            case LayerKind::conv2d: {
                if (cur.size() != 3 || cur[0] != l.in_channels)
                    shape_error(cur.empty() ? 0 : cur[0], l.in_channels, i, prev_desc,
                                l.describe());
                if (cur[1] < l.kernel || cur[2] < l.kernel || l.stride == 0)
                    throw ConfigError("conv2d kernel " + std::to_string(l.kernel) +
                                      " does not fit input " + shape_to_string(cur) +
                                      " at layer " + std::to_string(i));
                cur = {l.out_channels, (cur[1] - l.kernel) / l.stride + 1,
                       (cur[2] - l.kernel) / l.stride + 1};
                break;
            }
            case LayerKind::maxpool2d: {
                if (cur.size() != 3 || cur[1] < l.window || cur[2] < l.window || l.window == 0)
                    throw ConfigError("maxpool2d window " + std::to_string(l.window) +
                                      " does not fit input " + shape_to_string(cur) +
                                      " at layer " + std::to_string(i));
                cur = {cur[0], cur[1] / l.window, cur[2] / l.window};
                break;
            }
            case LayerKind::relu:
                break;
            case LayerKind::flatten:
                cur = {product(cur)};
                break;
        }
        shapes.push_back(cur);
        prev_desc = "layer " + std::to_string(i) + " (" + l.describe() + ")";
    }
    return shapes;
}

std::size_t Architecture::num_classes() const {
    if (layers.empty() || layers.back().kind != LayerKind::dense)
        throw ConfigError("architecture must end in a dense layer");
    return layers.back().out;
}

std::vector<std::size_t> Architecture::param_layer_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].parameterized()) idx.push_back(i);
    return idx;
}

bool Architecture::same_as(const Architecture& other) const {
    if (in_channels != other.in_channels || in_h != other.in_h || in_w != other.in_w ||
        layers.size() != other.layers.size())
        return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& a = layers[i];
        const LayerSpec& b = other.layers[i];
        if (a.kind != b.kind || a.in != b.in || a.out != b.out || a.in_channels != b.in_channels ||
            a.out_channels != b.out_channels || a.kernel != b.kernel || a.stride != b.stride ||
            a.window != b.window)
            return false;
    }
    return true;
}

Architecture make_mlp(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                      std::size_t classes, std::size_t hidden) {
    Architecture a;
    a.in_channels = in_channels;
    a.in_h = in_h;
    a.in_w = in_w;
    a.layers = {LayerSpec::flatten(), LayerSpec::dense(in_channels * in_h * in_w, hidden),
                LayerSpec::relu(), LayerSpec::dense(hidden, classes)};
    return a;
}

Architecture make_convnet(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                          std::size_t classes) {
    Architecture a;
    a.in_channels = in_channels;
    a.in_h = in_h;
    a.in_w = in_w;
    const std::size_t c1 = 6, c2 = 16, k = 5;
    const std::size_t h1 = (in_h - k + 1) / 2, w1 = (in_w - k + 1) / 2;
    const std::size_t h2 = (h1 - k + 1) / 2, w2 = (w1 - k + 1) / 2;
    const std::size_t flat = c2 * h2 * w2;
    a.layers = {LayerSpec::conv2d(in_channels, c1, k), LayerSpec::relu(), LayerSpec::maxpool2d(2),
                LayerSpec::conv2d(c1, c2, k),          LayerSpec::relu(), LayerSpec::maxpool2d(2),
                LayerSpec::flatten(),
                LayerSpec::dense(flat, 120),           LayerSpec::relu(),
                LayerSpec::dense(120, 84),             LayerSpec::relu(),
                LayerSpec::dense(84, classes)};
    return a;
}

}  // namespace forgetd
