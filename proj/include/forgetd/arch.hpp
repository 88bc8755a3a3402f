#pragma once

#include "forgetd/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace forgetd {

enum class LayerKind : std::uint32_t {
    dense = 0,
    conv2d = 1,
    maxpool2d = 2,
    relu = 3,
    flatten = 4,
};

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0, out = 0;                                       // dense
    std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1;  // conv2d
    std::size_t window = 0;                                            // maxpool2d

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride = 1);
    static LayerSpec maxpool2d(std::size_t window);
    static LayerSpec relu();
    static LayerSpec flatten();

    bool parameterized() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d;
    }
    std::size_t weight_count() const;
    std::size_t bias_count() const;
    std::string describe() const;
};

struct Architecture {
    std::size_t in_channels = 1, in_h = 1, in_w = 1;
    std::vector<LayerSpec> layers;

    std::vector<std::size_t> input_shape() const { return {in_channels, in_h, in_w}; }

    // Per-layer output shapes (sample shapes, no batch axis). Throws
    // ConfigError naming both layers on any incompatibility.
    std::vector<std::vector<std::size_t>> output_shapes() const;

    std::size_t num_classes() const;
    std::vector<std::size_t> param_layer_indices() const;
    bool same_as(const Architecture& other) const;
};

// Named architectures from the experimental protocol. `input_pixels` and
// `classes` come from the dataset.
Architecture make_mlp(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                      std::size_t classes, std::size_t hidden = 500);
Architecture make_convnet(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                          std::size_t classes);

}  // namespace forgetd
