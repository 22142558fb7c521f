#include "uavei/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uavei {

std::size_t DenseNet::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

DenseNet make_dense(std::vector<int> layer_sizes, OutputActivation out_act, Rng& rng) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("make_dense: need at least 2 layers");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("make_dense: layer sizes must be positive");

    DenseNet net;
    net.layer_sizes = std::move(layer_sizes);
    net.out_act = out_act;
    const int layers = static_cast<int>(net.layer_sizes.size()) - 1;
    net.weights.resize(layers);
    net.biases.resize(layers);
    for (int l = 0; l < layers; ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        net.weights[l].resize(static_cast<std::size_t>(out) * in);
        net.biases[l].resize(out);
        for (double& w : net.weights[l]) w = u(rng);
        for (double& b : net.biases[l]) b = u(rng);
    }
    return net;
}

const std::vector<double>& forward(const DenseNet& net, std::span<const double> x,
                                   ForwardTrace& trace) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw std::invalid_argument("forward: input size mismatch");
    const int layers = net.layer_count();
    trace.acts.resize(layers + 1);
    trace.acts[0].assign(x.begin(), x.end());
    for (int l = 0; l < layers; ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const std::vector<double>& a = trace.acts[l];
        std::vector<double>& next = trace.acts[l + 1];
        next.resize(out);
        const double* w = net.weights[l].data();
        for (int i = 0; i < out; ++i) {
            double z = net.biases[l][i];
            const double* row = w + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < in; ++j) z += row[j] * a[j];
            if (l + 1 < layers) {
                next[i] = z > 0.0 ? z : 0.0; // ReLU
            } else {
                next[i] = net.out_act == OutputActivation::Tanh ? std::tanh(z) : z;
            }
        }
    }
    return trace.acts.back();
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
    ForwardTrace tr;
    return forward(net, x, tr);
}

void NetGrads::zero() {
    for (auto& v : dw) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
}

double NetGrads::sq_norm() const {
    double s = 0.0;
    for (const auto& v : dw)
        for (double g : v) s += g * g;
    for (const auto& v : db)
        for (double g : v) s += g * g;
    return s;
}

NetGrads make_grads(const DenseNet& net) {
    NetGrads g;
    g.dw.resize(net.weights.size());
    g.db.resize(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.dw[l].assign(net.weights[l].size(), 0.0);
        g.db[l].assign(net.biases[l].size(), 0.0);
    }
    return g;
}

void backward_accum(const DenseNet& net, const ForwardTrace& trace,
                    std::span<const double> upstream, double scale, NetGrads* grads,
                    std::span<double> dx, BackwardWs& ws) {
    const int layers = net.layer_count();
    if (static_cast<int>(upstream.size()) != net.output_dim())
        throw std::invalid_argument("backward: upstream size mismatch");
    ws.delta.resize(layers);

    // Output-layer delta (gradient w.r.t. the pre-activation).
    {
        const std::vector<double>& out = trace.acts[layers];
        std::vector<double>& d = ws.delta[layers - 1];
        d.resize(out.size());
        if (net.out_act == OutputActivation::Tanh) {
            for (std::size_t i = 0; i < out.size(); ++i)
                d[i] = upstream[i] * (1.0 - out[i] * out[i]);
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) d[i] = upstream[i];
        }
    }

    for (int l = layers - 1; l >= 0; --l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const std::vector<double>& a = trace.acts[l];
        const std::vector<double>& d = ws.delta[l];
        if (grads) {
            std::vector<double>& dw = grads->dw[l];
            std::vector<double>& db = grads->db[l];
            for (int i = 0; i < out; ++i) {
                const double sd = scale * d[i];
                double* row = dw.data() + static_cast<std::size_t>(i) * in;
                for (int j = 0; j < in; ++j) row[j] += sd * a[j];
                db[i] += sd;
            }
        }
        const bool need_prev = l > 0 || !dx.empty();
        if (!need_prev) continue;
        const double* w = net.weights[l].data();
        if (l > 0) {
            std::vector<double>& prev = ws.delta[l - 1];
            prev.assign(in, 0.0);
            for (int i = 0; i < out; ++i) {
                const double di = d[i];
                const double* row = w + static_cast<std::size_t>(i) * in;
                for (int j = 0; j < in; ++j) prev[j] += row[j] * di;
            }
            // Gate through the ReLU of layer l's input activations.
            for (int j = 0; j < in; ++j)
                if (a[j] <= 0.0) prev[j] = 0.0;
        } else {
            if (static_cast<int>(dx.size()) != in)
                throw std::invalid_argument("backward: dx size mismatch");
            std::fill(dx.begin(), dx.end(), 0.0);
            for (int i = 0; i < out; ++i) {
                const double di = d[i];
                const double* row = w + static_cast<std::size_t>(i) * in;
                for (int j = 0; j < in; ++j) dx[j] += row[j] * di;
            }
        }
    }
}

GradientBundle backward(const DenseNet& net, std::span<const double> x,
                        std::span<const double> upstream) {
    GradientBundle b;
    b.grads = make_grads(net);
    b.dx.assign(net.input_dim(), 0.0);
    ForwardTrace tr;
    forward(net, x, tr);
    BackwardWs ws;
    backward_accum(net, tr, upstream, 1.0, &b.grads, b.dx, ws);
    return b;
}

NetAdam make_adam(const DenseNet& net) {
    NetAdam st;
    st.mw.resize(net.weights.size());
    st.vw.resize(net.weights.size());
    st.mb.resize(net.biases.size());
    st.vb.resize(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        st.mw[l].assign(net.weights[l].size(), 0.0);
        st.vw[l].assign(net.weights[l].size(), 0.0);
        st.mb[l].assign(net.biases[l].size(), 0.0);
        st.vb[l].assign(net.biases[l].size(), 0.0);
    }
    return st;
}

namespace {

void adam_apply(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double lr, double b1, double b2, double eps, double bc1,
                double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        if (!std::isfinite(gi)) throw std::runtime_error("adam_step: non-finite gradient");
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

void adam_step(DenseNet& net, const NetGrads& grads, NetAdam& st, double lr) {
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        adam_apply(net.weights[l], grads.dw[l], st.mw[l], st.vw[l], lr, st.beta1, st.beta2,
                   st.eps, bc1, bc2);
        adam_apply(net.biases[l], grads.db[l], st.mb[l], st.vb[l], lr, st.beta1, st.beta2, st.eps,
                   bc1, bc2);
    }
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    if (target.layer_sizes != online.layer_sizes)
        throw std::invalid_argument("soft_update: geometry mismatch");
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        for (std::size_t i = 0; i < target.weights[l].size(); ++i)
            target.weights[l][i] = tau * online.weights[l][i] + (1.0 - tau) * target.weights[l][i];
        for (std::size_t i = 0; i < target.biases[l].size(); ++i)
            target.biases[l][i] = tau * online.biases[l][i] + (1.0 - tau) * target.biases[l][i];
    }
}

std::vector<double> softmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty input");
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> softmax_temp(std::span<const double> z, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("softmax_temp: temperature must be positive");
    std::vector<double> scaled(z.begin(), z.end());
    for (double& v : scaled) v /= tau;
    return softmax(scaled);
}

std::vector<double> gumbel_perturb(std::span<const double> z, Rng& rng) {
    std::uniform_real_distribution<double> u01(std::numeric_limits<double>::min(), 1.0);
    std::vector<double> out(z.begin(), z.end());
    for (double& v : out) v += -std::log(-std::log(u01(rng)));
    return out;
}

std::vector<double> gumbel_softmax(std::span<const double> z, double tau, Rng& rng) {
    if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: temperature must be positive");
    return softmax_temp(gumbel_perturb(z, rng), tau);
}

int argmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

} // namespace uavei
