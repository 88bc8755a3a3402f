#pragma once

#include "forgetd/arch.hpp"
#include "forgetd/tensor.hpp"

#include <cstdint>
#include <vector>

namespace forgetd {

// One parameterized layer's values: weights first (row-major), then biases,
// in a single flat vector. Masks and stored updates use the same layout.
struct LayerParams {
    Vector values;
    std::size_t weight_count = 0;
    std::size_t bias_count = 0;

    MatrixMap weights_as(std::size_t rows, std::size_t cols) {
        return MatrixMap(values.data(), static_cast<Eigen::Index>(rows),
                         static_cast<Eigen::Index>(cols));
    }
    ConstMatrixMap weights_as(std::size_t rows, std::size_t cols) const {
        return ConstMatrixMap(values.data(), static_cast<Eigen::Index>(rows),
                              static_cast<Eigen::Index>(cols));
    }
    Eigen::Map<Vector> biases() {
        return Eigen::Map<Vector>(values.data() + weight_count,
                                  static_cast<Eigen::Index>(bias_count));
    }
    Eigen::Map<const Vector> biases() const {
        return Eigen::Map<const Vector>(values.data() + weight_count,
                                        static_cast<Eigen::Index>(bias_count));
    }
};

// Anything "shaped like the model parameters": gradients, update deltas, sums.
using ParamShaped = std::vector<LayerParams>;

struct ModelParams {
    Architecture arch;
    std::vector<LayerParams> layers;
};

struct Batch {
    Tensor inputs;   // n x c x h x w  (or n x flat)
    Matrix one_hot;  // n x C
};

struct LossGrads {
    double loss = 0.0;
    ParamShaped grads;
};

struct SgdStep {
    ModelParams params;
    ParamShaped delta;  // params_after - params_before, exact float difference
};

struct TrainConfig {
    std::size_t epochs = 8;
    std::size_t batch_size = 128;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
};

ModelParams build_model(const Architecture& arch, std::uint64_t seed);

Tensor forward(const ModelParams& params, const Tensor& batch_inputs);

// Row-stochastic class probabilities (softmax of logits with max-subtraction).
Matrix softmax_rows(const Matrix& logits);

LossGrads loss_and_grads(const ModelParams& params, const Batch& batch);

SgdStep sgd_step(const ModelParams& params, const ParamShaped& grads, double lr);

void param_axpy(ModelParams& dst, int sign, const ParamShaped& src);

ParamShaped zero_deltas_like(const ModelParams& params);
void accumulate(ParamShaped& dst, const ParamShaped& src);

bool bitwise_equal(const ModelParams& a, const ModelParams& b);
double max_abs_diff(const ModelParams& a, const ModelParams& b);

}  // namespace forgetd
