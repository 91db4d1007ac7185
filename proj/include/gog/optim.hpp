#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gog/error.hpp"
#include "gog/numeric.hpp"

namespace gog {

enum class OptimizerKind { Sgd, Adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw InvalidArgument("unknown optimizer '" + s + "' (expected sgd or adam)");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

/// Applies `params[i] += direction * lr * step(grads[i])`; direction is -1 to
/// minimize and +1 to maximize.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
        if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be nonnegative");
    }

    double learning_rate() const noexcept { return lr_; }

    void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, double direction) {
        if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient count mismatch");
        if (kind_ == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) axpy(*params[i], direction * lr_, *grads[i]);
            return;
        }
        if (first_.empty()) {
            for (const Matrix* g : grads) {
                first_.emplace_back(g->rows(), g->cols());
                second_.emplace_back(g->rows(), g->cols());
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& m = first_[i].data();
            auto& v = second_[i].data();
            const auto& g = grads[i]->data();
            auto& p = params[i]->data();
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
                v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
                p[k] += direction * lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
            }
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    OptimizerKind kind_;
    double lr_;
    std::size_t t_ = 0;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
};

}  // namespace gog
