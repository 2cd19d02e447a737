#include "spheres/models.hpp"

#include "spheres/error.hpp"

#include <algorithm>
#include <cmath>

namespace spheres {

std::string to_string(Family family) { return family == Family::Quadratic ? "quadratic" : "mlp"; }

Family family_from_string(const std::string& name) {
    if (name == "quadratic" || name == "quad") return Family::Quadratic;
    if (name == "mlp" || name == "relu") return Family::Mlp;
    throw DomainError("unknown model family '" + name + "' (expected quadratic or mlp)");
}

// ---------------------------------------------------------------------------
// QuadraticModel. The quadratic net has no batch statistics, so train and
// eval mode coincide.

std::size_t QuadraticModel::parameter_count() const { return static_cast<std::size_t>(net_.w1.size()) + 2; }

std::unique_ptr<Model> QuadraticModel::clone() const { return std::make_unique<QuadraticModel>(net_); }

Vector QuadraticModel::logits(const Matrix& batch) const { return quad_logits(net_, batch); }

Vector QuadraticModel::logit_gradients(const Matrix& batch, Matrix& grad) const {
    const QuadForwardCache c = quad_forward(net_, batch);
    // d logit / d x = 2w · W1ᵀ W1 x
    grad = (2.0 * net_.w) * c.hidden * net_.w1;
    return c.logits;
}

double QuadraticModel::loss(const Matrix& batch, std::span<const int> labels, Mode) const {
    const Vector l = quad_logits(net_, batch);
    double total = 0.0;
    for (Eigen::Index i = 0; i < l.size(); ++i) total += sigmoid_ce_loss(l[i], labels[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(l.size());
}

double QuadraticModel::loss_and_gradients(const Matrix& batch, std::span<const int> labels, Mode,
                                          std::vector<Vector>& grads) const {
    const QuadForwardCache c = quad_forward(net_, batch);
    const QuadGradients g = quad_backward(net_, c, labels);
    grads.clear();
    grads.emplace_back(Eigen::Map<const Vector>(g.w1.data(), g.w1.size()));
    grads.push_back(Vector::Constant(1, g.w));
    grads.push_back(Vector::Constant(1, g.b));
    double total = 0.0;
    for (Eigen::Index i = 0; i < c.logits.size(); ++i) {
        total += sigmoid_ce_loss(c.logits[i], labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(c.logits.size());
}

double QuadraticModel::train_step_gradients(const Matrix& batch, std::span<const int> labels,
                                            std::vector<Vector>& grads) {
    return loss_and_gradients(batch, labels, Mode::Train, grads);
}

std::vector<ParamBlock> QuadraticModel::parameters() {
    return {{"w1", {net_.w1.data(), static_cast<std::size_t>(net_.w1.size())}},
            {"w", {&net_.w, 1}},
            {"b", {&net_.b, 1}}};
}

// ---------------------------------------------------------------------------

double gradient_check(const Model& model, const Matrix& batch, std::span<const int> labels, Mode mode, double eps) {
    std::vector<Vector> analytic;
    model.loss_and_gradients(batch, labels, mode, analytic);

    std::unique_ptr<Model> probe = model.clone();
    std::vector<ParamBlock> blocks = probe->parameters();
    if (blocks.size() != analytic.size()) throw Error("gradient_check: gradient/parameter block mismatch");

    double worst = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        std::span<double> values = blocks[b].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = probe->loss(batch, labels, mode);
            values[i] = saved - eps;
            const double down = probe->loss(batch, labels, mode);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double exact = analytic[b][static_cast<Eigen::Index>(i)];
            const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(exact - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace spheres
