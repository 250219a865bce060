#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segqa/tensor.hpp"

namespace segqa::ad {

// Cosine annealing: lr(t) = min + 0.5 (base - min)(1 + cos(pi t / T)).
struct CosineSchedule {
    double base_lr = 1e-3;
    double min_lr = 0.0;
    int64_t total_steps = 1;

    double lr(int64_t step) const {
        if (step >= total_steps) return min_lr;
        if (step < 0) step = 0;
        return min_lr + 0.5 * (base_lr - min_lr) *
                            (1.0 + std::cos(M_PI * double(step) / double(total_steps)));
    }
};

template <class T>
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step() = 0;
    virtual void set_lr(T lr) = 0;
    virtual T lr() const = 0;
    virtual int64_t step_count() const = 0;
    virtual void set_step_count(int64_t t) = 0;

    // Flat state access for checkpointing: (name, values) pairs plus counters.
    virtual std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() = 0;
    virtual std::string kind() const = 0;

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

protected:
    explicit Optimizer(std::vector<Tensor<T>> params) : params_(std::move(params)) {}
    std::vector<Tensor<T>> params_;
};

// AdamW with decoupled weight decay: the decay shrinks parameters directly
// and never enters the moment estimates.
template <class T>
class AdamW : public Optimizer<T> {
public:
    struct Config {
        T lr = T(1e-3);
        T beta1 = T(0.9);
        T beta2 = T(0.999);
        T eps = T(1e-8);
        T weight_decay = T(0);
    };

    AdamW(std::vector<Tensor<T>> params, Config cfg)
        : Optimizer<T>(std::move(params)), cfg_(cfg) {
        for (auto& p : this->params_) {
            m_.emplace_back(p.data().size(), T(0));
            v_.emplace_back(p.data().size(), T(0));
        }
    }

    void step() override {
        ++t_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, T(t_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, T(t_));
        for (size_t pi = 0; pi < this->params_.size(); ++pi) {
            auto& p = this->params_[pi].data();
            auto& g = this->params_[pi].grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < p.size(); ++i) {
                if (cfg_.weight_decay != T(0)) p[i] -= cfg_.lr * cfg_.weight_decay * p[i];
                m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * g[i] * g[i];
                T mhat = m[i] / bc1;
                T vhat = v[i] / bc2;
                p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void set_lr(T lr) override { cfg_.lr = lr; }
    T lr() const override { return cfg_.lr; }
    int64_t step_count() const override { return t_; }
    std::string kind() const override { return "adamw"; }

    std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() override {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        for (size_t i = 0; i < m_.size(); ++i) {
            out.emplace_back("m." + std::to_string(i), &m_[i]);
            out.emplace_back("v." + std::to_string(i), &v_[i]);
        }
        return out;
    }

    void set_step_count(int64_t t) override { t_ = t; }

private:
    Config cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

template <class T>
class Adadelta : public Optimizer<T> {
public:
    struct Config {
        T lr = T(1);
        T rho = T(0.9);
        T eps = T(1e-6);
    };

    Adadelta(std::vector<Tensor<T>> params, Config cfg)
        : Optimizer<T>(std::move(params)), cfg_(cfg) {
        for (auto& p : this->params_) {
            square_avg_.emplace_back(p.data().size(), T(0));
            acc_delta_.emplace_back(p.data().size(), T(0));
        }
    }

    void step() override {
        ++t_;
        for (size_t pi = 0; pi < this->params_.size(); ++pi) {
            auto& p = this->params_[pi].data();
            auto& g = this->params_[pi].grad();
            auto& sa = square_avg_[pi];
            auto& ad = acc_delta_[pi];
            for (size_t i = 0; i < p.size(); ++i) {
                sa[i] = cfg_.rho * sa[i] + (T(1) - cfg_.rho) * g[i] * g[i];
                T delta = std::sqrt(ad[i] + cfg_.eps) / std::sqrt(sa[i] + cfg_.eps) * g[i];
                ad[i] = cfg_.rho * ad[i] + (T(1) - cfg_.rho) * delta * delta;
                p[i] -= cfg_.lr * delta;
            }
        }
    }

    void set_lr(T lr) override { cfg_.lr = lr; }
    T lr() const override { return cfg_.lr; }
    int64_t step_count() const override { return t_; }
    std::string kind() const override { return "adadelta"; }

    std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() override {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        for (size_t i = 0; i < square_avg_.size(); ++i) {
            out.emplace_back("square_avg." + std::to_string(i), &square_avg_[i]);
            out.emplace_back("acc_delta." + std::to_string(i), &acc_delta_[i]);
        }
        return out;
    }

    void set_step_count(int64_t t) override { t_ = t; }

private:
    Config cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> square_avg_, acc_delta_;
};

}  // namespace segqa::ad
