// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sivgan/ops.hpp"
#include "sivgan/rng.hpp"

namespace sivgan::nn {

using sivgan::Rng;
using sivgan::Shape;
using sivgan::Tensor;
using sivgan::Var;

template <typename S>
struct NamedParam {
    std::string name;
    Var<S> var;
};

template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// 2d convolution layer (stride 1, same padding) with He-normal weights,
/// zero bias, and optional spectral normalization via power iteration.
template <typename S>
class Conv2d {
public:
    Conv2d() = default;

    static Conv2d create(Rng& rng, int in_c, int out_c, int k, bool spectral) {
        Conv2d m;
        m.in_c_ = in_c;
        m.out_c_ = out_c;
        m.k_ = k;
        m.spectral_ = spectral;
        Tensor<S> w(Shape{out_c, in_c, k, k});
        const double std = std::sqrt(2.0 / (double(in_c) * k * k));
        for (std::int64_t i = 0; i < w.data.size(); ++i) w.data[i] = S(rng.normal() * std);
        m.w_ = Var<S>::leaf(std::move(w));
        m.b_ = Var<S>::leaf(Tensor<S>(Shape{out_c, 1, 1, 1}));
        if (spectral) {
            m.u_ = VecX<S>(out_c);
            m.v_ = VecX<S>(std::int64_t(in_c) * k * k);
            for (std::int64_t i = 0; i < m.u_.size(); ++i) m.u_[i] = S(rng.normal());
            for (std::int64_t i = 0; i < m.v_.size(); ++i) m.v_[i] = S(rng.normal());
            m.u_.normalize();
            m.v_.normalize();
            m.power_iteration(1);  // ensures sigma = u^T W v > 0 from the start
        }
        return m;
    }

    Var<S> forward(const Var<S>& x) const {
        if (!spectral_) return ops::conv2d(x, w_, b_);
        return ops::conv2d(x, ops::spectral_scale(w_, u_, v_), b_);
    }

    /// Advances the power iteration on the raw weight. Called once per
    /// optimization step, before the forward pass that uses the estimate.
    void power_iteration(int steps = 1) {
        if (!spectral_) return;
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const Mat> wm(w_.value().data.data(), out_c_, std::int64_t(in_c_) * k_ * k_);
        for (int i = 0; i < steps; ++i) {
            v_ = wm.transpose() * u_;
            v_ /= v_.norm() + S(1e-12);
            u_ = wm * v_;
            u_ /= u_.norm() + S(1e-12);
        }
    }

    S sigma() const {
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const Mat> wm(w_.value().data.data(), out_c_, std::int64_t(in_c_) * k_ * k_);
        return u_.dot(wm * v_);
    }

    void params(const std::string& prefix, std::vector<NamedParam<S>>& out) {
        out.push_back({prefix + ".w", w_});
        out.push_back({prefix + ".b", b_});
    }

    /// Spectral state exposed as named vectors for checkpointing.
    void sn_state(const std::string& prefix, std::vector<std::pair<std::string, VecX<S>*>>& out) {
        if (!spectral_) return;
        out.push_back({prefix + ".u", &u_});
        out.push_back({prefix + ".v", &v_});
    }

    Var<S>& weight() { return w_; }
    Var<S>& bias() { return b_; }
    const Var<S>& weight() const { return w_; }
    const Var<S>& bias() const { return b_; }
    bool spectral() const { return spectral_; }
    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }
    int kernel() const { return k_; }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0;
    bool spectral_ = false;
    Var<S> w_, b_;
    VecX<S> u_, v_;
};

/// Adam with bias correction. Moment slots are keyed by parameter name so
/// they survive checkpoint round trips. Parameters whose gradient is absent
/// after backward (detached model parts) are left untouched.
template <typename S>
class Adam {
public:
    struct Slot {
        Eigen::Array<S, Eigen::Dynamic, 1> m, v;
    };

    Adam() = default;
    Adam(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<NamedParam<S>>& params) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, double(t_));
        const double c2 = 1.0 - std::pow(beta2_, double(t_));
        for (auto& p : params) {
            const Tensor<S>& g = p.var.grad();
            if (g.numel() == 0) continue;
            Slot& s = slots_[p.name];
            if (s.m.size() == 0) {
                s.m = Eigen::Array<S, Eigen::Dynamic, 1>::Zero(g.numel());
                s.v = Eigen::Array<S, Eigen::Dynamic, 1>::Zero(g.numel());
            }
            s.m = S(beta1_) * s.m + S(1 - beta1_) * g.data;
            s.v = S(beta2_) * s.v + S(1 - beta2_) * g.data.square();
            p.var.value().data -= S(lr_ / c1) * s.m / ((s.v / S(c2)).sqrt() + S(eps_));
        }
    }

    std::int64_t t() const { return t_; }
    void set_t(std::int64_t t) { t_ = t; }
    std::map<std::string, Slot>& slots() { return slots_; }
    double lr() const { return lr_; }

private:
    double lr_ = 2e-4, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

template <typename S>
void zero_grads(std::vector<NamedParam<S>>& params) {
    for (auto& p : params) p.var.zero_grad();
}

}  // namespace sivgan::nn
