// Dense feed-forward networks (double precision) with exact reverse-mode
// gradients, Adam, soft target updates, and Gumbel-Softmax utilities.
// Hidden layers use ReLU; the output layer is identity or tanh.
#pragma once

#include <span>
#include <vector>

#include "uavei/rng.hpp"

namespace uavei {

enum class OutputActivation { Identity, Tanh };

struct DenseNet {
    std::vector<int> layer_sizes;              // [in, hidden..., out]
    OutputActivation out_act = OutputActivation::Identity;
    std::vector<std::vector<double>> weights;  // per layer, row-major [out][in]
    std::vector<std::vector<double>> biases;   // per layer

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
    std::size_t param_count() const;
};

// Weights and biases ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
DenseNet make_dense(std::vector<int> layer_sizes, OutputActivation out_act, Rng& rng);

// Post-activation values per layer; acts[0] is the input copy.
struct ForwardTrace {
    std::vector<std::vector<double>> acts;
};

// Runs the net, filling `trace`; returns the output activations.
const std::vector<double>& forward(const DenseNet& net, std::span<const double> x,
                                   ForwardTrace& trace);
std::vector<double> forward(const DenseNet& net, std::span<const double> x);

// Per-parameter gradient accumulator shaped like a net.
struct NetGrads {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;
    void zero();
    double sq_norm() const;
};
NetGrads make_grads(const DenseNet& net);

// Scratch buffers reused across backward calls (one per thread).
struct BackwardWs {
    std::vector<std::vector<double>> delta;
};

// Accumulates scale * d(upstream . output)/d(params) into `grads` (skipped
// when null) and writes the input gradient into `dx` (skipped when empty).
// `trace` must come from a forward() on the same net.
void backward_accum(const DenseNet& net, const ForwardTrace& trace,
                    std::span<const double> upstream, double scale, NetGrads* grads,
                    std::span<double> dx, BackwardWs& ws);

// Convenience single-sample API: gradients of (upstream . output) for every
// parameter plus the gradient with respect to the input vector.
struct GradientBundle {
    NetGrads grads;
    std::vector<double> dx;
};
GradientBundle backward(const DenseNet& net, std::span<const double> x,
                        std::span<const double> upstream);

struct NetAdam {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};
NetAdam make_adam(const DenseNet& net);

// One bias-corrected Adam descent step. Throws std::runtime_error if any
// gradient entry is non-finite.
void adam_step(DenseNet& net, const NetGrads& grads, NetAdam& st, double lr);

// target <- tau * online + (1 - tau) * target (geometries must match).
void soft_update(DenseNet& target, const DenseNet& online, double tau);

// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> z);
// softmax(z / tau); throws std::invalid_argument if tau <= 0.
std::vector<double> softmax_temp(std::span<const double> z, double tau);
// z + g with g_i = -ln(-ln u_i), u_i ~ U(0,1).
std::vector<double> gumbel_perturb(std::span<const double> z, Rng& rng);
// Relaxed one-hot sample softmax((z + g) / tau).
std::vector<double> gumbel_softmax(std::span<const double> z, double tau, Rng& rng);

// Argmax index, lowest index on ties.
int argmax(std::span<const double> v);

} // namespace uavei
