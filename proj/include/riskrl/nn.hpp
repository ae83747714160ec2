#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "riskrl/common.hpp"
#include "riskrl/math.hpp"
#include "riskrl/rng.hpp"

namespace riskrl::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { ReLU, Tanh, Swish };

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Swish: return "swish";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    if (s == "swish") return Activation::Swish;
    throw invalid_input("unknown activation: " + s);
}

namespace detail {

inline double act_value(Activation a, double x) {
    switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Swish: return x * sigmoid(x);
    }
    return x;
}

inline double act_deriv(Activation a, double x) {
    switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::Swish: {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    }
    }
    return 1.0;
}

} // namespace detail

struct LayerGrads {
    MatrixXd W;
    VectorXd b;
};

/**
 * Dense feedforward network on double precision, batch-first rows.
 * Hidden layers share one activation; the output layer is linear.
 * Weights use fan-in-scaled uniform init, biases start at zero.
 */
class Mlp {
public:
    struct Layer {
        MatrixXd W; // out x in
        VectorXd b; // out
    };

    struct Cache {
        std::vector<MatrixXd> pre;  // pre-activations per layer
        std::vector<MatrixXd> post; // post[0] = input, post[l] = activated layer l
    };

    Mlp() = default;

    Mlp(std::vector<int> sizes, Activation act, Rng& rng, double final_scale = 1.0)
        : sizes_(std::move(sizes)), act_(act) {
        require(sizes_.size() >= 2, "Mlp: need at least input and output dims");
        layers_.resize(sizes_.size() - 1);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            require(in >= 1 && out >= 1, "Mlp: layer sizes must be positive");
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            const double scale = (l + 1 == layers_.size()) ? final_scale : 1.0;
            layers_[l].W.resize(out, in);
            for (int i = 0; i < out; ++i)
                for (int j = 0; j < in; ++j)
                    layers_[l].W(i, j) = scale * rng.uniform(-bound, bound);
            layers_[l].b = VectorXd::Zero(out);
        }
    }

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    Activation activation() const { return act_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    MatrixXd forward(const MatrixXd& X) const {
        Cache scratch;
        return forward(X, scratch);
    }

    MatrixXd forward(const MatrixXd& X, Cache& cache) const {
        require(X.cols() == input_dim(), "Mlp::forward: input width mismatch");
        const std::size_t L = layers_.size();
        cache.pre.resize(L);
        cache.post.resize(L + 1);
        cache.post[0] = X;
        for (std::size_t l = 0; l < L; ++l) {
            cache.pre[l].noalias() = cache.post[l] * layers_[l].W.transpose();
            cache.pre[l].rowwise() += layers_[l].b.transpose();
            if (l + 1 == L) {
                cache.post[l + 1] = cache.pre[l];
            } else {
                cache.post[l + 1] = cache.pre[l].unaryExpr(
                    [a = act_](double x) { return detail::act_value(a, x); });
            }
        }
        return cache.post[L];
    }

    /// Backpropagates dY (n x out) through the cached forward pass. Fills
    /// parameter gradients (averaging is the caller's job) and returns the
    /// gradient with respect to the input rows.
    MatrixXd backward(const Cache& cache, const MatrixXd& dY,
                      std::vector<LayerGrads>& grads) const {
        const std::size_t L = layers_.size();
        grads.resize(L);
        MatrixXd delta = dY;
        for (std::size_t l = L; l-- > 0;) {
            if (l + 1 != L) {
                delta = delta.cwiseProduct(cache.pre[l].unaryExpr(
                    [a = act_](double x) { return detail::act_deriv(a, x); }));
            }
            grads[l].W.noalias() = delta.transpose() * cache.post[l];
            grads[l].b = delta.colwise().sum().transpose();
            if (l > 0) delta = (delta * layers_[l].W).eval();
            else return delta * layers_[l].W;
        }
        return MatrixXd::Zero(dY.rows(), input_dim()); // unreachable
    }

    std::vector<LayerGrads> zero_grads() const {
        std::vector<LayerGrads> g(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            g[l].W = MatrixXd::Zero(layers_[l].W.rows(), layers_[l].W.cols());
            g[l].b = VectorXd::Zero(layers_[l].b.size());
        }
        return g;
    }

    void write_text(std::ostream& os) const {
        os << "mlp " << sizes_.size() << ' ';
        for (int s : sizes_) os << s << ' ';
        os << to_string(act_) << '\n';
        os.precision(17);
        for (const auto& layer : layers_) {
            for (int i = 0; i < layer.W.rows(); ++i)
                for (int j = 0; j < layer.W.cols(); ++j) os << layer.W(i, j) << ' ';
            os << '\n';
            for (int i = 0; i < layer.b.size(); ++i) os << layer.b(i) << ' ';
            os << '\n';
        }
    }

    static Mlp read_text(std::istream& is) {
        std::string tag;
        is >> tag;
        ensure(tag == "mlp", "Mlp::read_text: bad tag '" + tag + "'");
        std::size_t n = 0;
        is >> n;
        ensure(n >= 2 && n < 64, "Mlp::read_text: implausible layer count");
        std::vector<int> sizes(n);
        for (auto& s : sizes) is >> s;
        std::string act;
        is >> act;
        Mlp net;
        net.sizes_ = sizes;
        net.act_ = activation_from_string(act);
        net.layers_.resize(n - 1);
        for (std::size_t l = 0; l + 1 < n; ++l) {
            auto& layer = net.layers_[l];
            layer.W.resize(sizes[l + 1], sizes[l]);
            for (int i = 0; i < layer.W.rows(); ++i)
                for (int j = 0; j < layer.W.cols(); ++j) is >> layer.W(i, j);
            layer.b.resize(sizes[l + 1]);
            for (int i = 0; i < layer.b.size(); ++i) is >> layer.b(i);
        }
        ensure(!is.fail(), "Mlp::read_text: truncated stream");
        return net;
    }

private:
    std::vector<int> sizes_;
    std::vector<Layer> layers_;
    Activation act_ = Activation::Swish;
};

/// Adam over an Mlp's parameters.
class Adam {
public:
    Adam() = default;

    Adam(const Mlp& net, double lr) : lr_(lr) {
        m_ = net.zero_grads();
        v_ = net.zero_grads();
    }

    void update(Mlp& net, const std::vector<LayerGrads>& grads) {
        ++step_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        auto& layers = net.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            m_[l].W = beta1_ * m_[l].W + (1.0 - beta1_) * grads[l].W;
            v_[l].W = beta2_ * v_[l].W + (1.0 - beta2_) * grads[l].W.cwiseAbs2();
            layers[l].W.array() -=
                lr_ * (m_[l].W.array() / c1) / ((v_[l].W.array() / c2).sqrt() + eps_);
            m_[l].b = beta1_ * m_[l].b + (1.0 - beta1_) * grads[l].b;
            v_[l].b = beta2_ * v_[l].b + (1.0 - beta2_) * grads[l].b.cwiseAbs2();
            layers[l].b.array() -=
                lr_ * (m_[l].b.array() / c1) / ((v_[l].b.array() / c2).sqrt() + eps_);
        }
    }

    long step_count() const { return step_; }

    void write_text(std::ostream& os) const {
        os << "adam " << lr_ << ' ' << step_ << ' ' << m_.size() << '\n';
        os.precision(17);
        for (const auto& part : {std::cref(m_), std::cref(v_)})
            for (const auto& g : part.get()) {
                for (int i = 0; i < g.W.rows(); ++i)
                    for (int j = 0; j < g.W.cols(); ++j) os << g.W(i, j) << ' ';
                for (int i = 0; i < g.b.size(); ++i) os << g.b(i) << ' ';
                os << '\n';
            }
    }

    static Adam read_text(std::istream& is, const Mlp& net) {
        std::string tag;
        is >> tag;
        ensure(tag == "adam", "Adam::read_text: bad tag");
        Adam opt(net, 0.0);
        std::size_t n = 0;
        is >> opt.lr_ >> opt.step_ >> n;
        ensure(n == opt.m_.size(), "Adam::read_text: layer count mismatch");
        for (auto* part : {&opt.m_, &opt.v_})
            for (auto& g : *part) {
                for (int i = 0; i < g.W.rows(); ++i)
                    for (int j = 0; j < g.W.cols(); ++j) is >> g.W(i, j);
                for (int i = 0; i < g.b.size(); ++i) is >> g.b(i);
            }
        ensure(!is.fail(), "Adam::read_text: truncated stream");
        return opt;
    }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long step_ = 0;
    std::vector<LayerGrads> m_, v_;
};

/// Adam on a single scalar (the entropy temperature).
struct AdamScalar {
    double lr = 3e-4;
    double m = 0.0, v = 0.0;
    long step = 0;

    void update(double& x, double g) {
        ++step;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(step)));
        const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(step)));
        x -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
};

} // namespace riskrl::nn
