#include "spheres/models.hpp"

#include "spheres/error.hpp"

#include <cmath>
#include <string>

namespace spheres {

MlpNet make_mlp(std::size_t n, const std::vector<std::size_t>& hidden, RngStream& stream) {
    if (n == 0) throw DomainError("make_mlp: input dimension must be positive");
    if (hidden.empty()) throw DomainError("make_mlp: need at least one hidden layer");
    MlpNet net;
    net.input_dim = n;
    net.hidden = hidden;
    std::size_t fan_in = n;
    for (std::size_t width : hidden) {
        if (width == 0) throw DomainError("make_mlp: hidden widths must be positive");
        Matrix w(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in));
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * stream.normal();
        net.weights.push_back(std::move(w));
        const auto wi = static_cast<Eigen::Index>(width);
        net.norms.push_back(BatchNormParams{Vector::Ones(wi), Vector::Zero(wi), Vector::Zero(wi), Vector::Ones(wi)});
        fan_in = width;
    }
    net.readout.resize(static_cast<Eigen::Index>(fan_in));
    const double sd = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < net.readout.size(); ++i) net.readout[i] = sd * stream.normal();
    net.readout_bias = 0.0;
    return net;
}

MlpForward mlp_forward_stateless(const MlpNet& net, const Matrix& batch, Mode mode) {
    if (static_cast<std::size_t>(batch.cols()) != net.input_dim) {
        throw DimensionError("mlp_forward: expected inputs of dimension " + std::to_string(net.input_dim) +
                             ", got " + std::to_string(batch.cols()));
    }
    const Eigen::Index rows = batch.rows();
    if (mode == Mode::Train && rows < 2) {
        throw DomainError("mlp_forward: train mode needs a batch of at least 2 for batch statistics");
    }

    MlpForward out;
    MlpForwardCache& c = out.cache;
    c.owner = &net;
    c.mode = mode;
    const std::size_t layers = net.weights.size();
    c.inputs.reserve(layers);
    c.inputs.push_back(batch);

    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix pre = c.inputs[l] * net.weights[l].transpose();
        const BatchNormParams& bn = net.norms[l];
        Vector mean, var;
        if (mode == Mode::Train) {
            mean = pre.colwise().mean().transpose();
            var = (pre.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        } else {
            mean = bn.running_mean;
            var = bn.running_var;
        }
        const Vector inv_std = (var.array() + net.epsilon).rsqrt().matrix();
        Matrix xhat = (pre.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
        Matrix act = ((xhat.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
                      bn.beta.transpose().array())
                         .cwiseMax(0.0)
                         .matrix();
        c.normalized.push_back(std::move(xhat));
        c.mean.push_back(std::move(mean));
        c.variance.push_back(std::move(var));
        c.inv_std.push_back(inv_std);
        if (l + 1 < layers) {
            c.inputs.push_back(std::move(act));
        } else {
            c.last_hidden = std::move(act);
        }
    }
    c.logits = (c.last_hidden * net.readout).array() + net.readout_bias;
    out.logits = c.logits;
    return out;
}

MlpForward mlp_forward(MlpNet& net, const Matrix& batch, Mode mode) {
    MlpForward out = mlp_forward_stateless(net, batch, mode);
    if (mode == Mode::Train) {
        const double rows = static_cast<double>(batch.rows());
        const double unbias = rows / (rows - 1.0);
        for (std::size_t l = 0; l < net.norms.size(); ++l) {
            BatchNormParams& bn = net.norms[l];
            bn.running_mean = net.momentum * bn.running_mean + (1.0 - net.momentum) * out.cache.mean[l];
            bn.running_var =
                net.momentum * bn.running_var + (1.0 - net.momentum) * unbias * out.cache.variance[l];
        }
    }
    return out;
}

namespace {

void check_cache(const MlpNet& net, const MlpForwardCache& cache, std::size_t label_count) {
    if (cache.owner != &net || cache.normalized.size() != net.weights.size() ||
        cache.inputs.size() != net.weights.size()) {
        throw StaleCacheError("mlp_backward: cache was produced by a different network");
    }
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (cache.normalized[l].cols() != net.weights[l].rows() || cache.inputs[l].cols() != net.weights[l].cols()) {
            throw StaleCacheError("mlp_backward: cached layer shapes do not match the network");
        }
    }
    if (static_cast<Eigen::Index>(label_count) != cache.logits.size()) {
        throw StaleCacheError("mlp_backward: label count does not match cached batch");
    }
}

// Backpropagates d loss / d logit through the cached pass. Fills parameter
// gradients when `grads` is non-null and the input gradient when `dinput` is.
void backprop(const MlpNet& net, const MlpForwardCache& c, const Vector& dlogit, MlpGradients* grads,
              Matrix* dinput) {
    const std::size_t layers = net.weights.size();
    if (grads) {
        grads->weights.assign(layers, Matrix());
        grads->gamma.assign(layers, Vector());
        grads->beta.assign(layers, Vector());
        grads->readout = c.last_hidden.transpose() * dlogit;
        grads->readout_bias = dlogit.sum();
    }
    Matrix da = dlogit * net.readout.transpose();  // B × width
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& act = (l + 1 < layers) ? c.inputs[l + 1] : c.last_hidden;
        const Matrix dy = (act.array() > 0.0).select(da.array(), 0.0).matrix();
        const Matrix& xhat = c.normalized[l];
        if (grads) {
            grads->gamma[l] = (dy.array() * xhat.array()).colwise().sum().transpose();
            grads->beta[l] = dy.colwise().sum().transpose();
        }
        const Matrix dxhat = dy.array().rowwise() * net.norms[l].gamma.transpose().array();
        Matrix dpre;
        if (c.mode == Mode::Train) {
            const Eigen::RowVectorXd mean_dxhat = dxhat.colwise().mean();
            const Eigen::RowVectorXd mean_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().mean();
            dpre = ((dxhat.rowwise() - mean_dxhat).array() - xhat.array().rowwise() * mean_dxhat_xhat.array())
                       .rowwise() *
                   c.inv_std[l].transpose().array();
        } else {
            dpre = dxhat.array().rowwise() * c.inv_std[l].transpose().array();
        }
        if (grads) grads->weights[l] = dpre.transpose() * c.inputs[l];
        if (l > 0) {
            da = dpre * net.weights[l];
        } else if (dinput) {
            *dinput = dpre * net.weights[0];
        }
    }
}

}  // namespace

MlpGradients mlp_backward(const MlpNet& net, const MlpForwardCache& cache, std::span<const int> labels) {
    check_cache(net, cache, labels.size());
    const Eigen::Index rows = cache.logits.size();
    Vector dlogit(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        dlogit[i] = sigmoid_ce_grad(cache.logits[i], labels[static_cast<std::size_t>(i)]) / static_cast<double>(rows);
    }
    MlpGradients g;
    backprop(net, cache, dlogit, &g, nullptr);
    return g;
}

// ---------------------------------------------------------------------------
// MlpModel

std::size_t MlpModel::parameter_count() const {
    std::size_t count = static_cast<std::size_t>(net_.readout.size()) + 1;
    for (std::size_t l = 0; l < net_.weights.size(); ++l) {
        count += static_cast<std::size_t>(net_.weights[l].size()) + 2 * static_cast<std::size_t>(net_.norms[l].gamma.size());
    }
    return count;
}

std::unique_ptr<Model> MlpModel::clone() const { return std::make_unique<MlpModel>(net_); }

Vector MlpModel::logits(const Matrix& batch) const {
    return mlp_forward_stateless(net_, batch, Mode::Eval).logits;
}

Vector MlpModel::logit_gradients(const Matrix& batch, Matrix& grad) const {
    const MlpForward fwd = mlp_forward_stateless(net_, batch, Mode::Eval);
    backprop(net_, fwd.cache, Vector::Ones(batch.rows()), nullptr, &grad);
    return fwd.logits;
}

double MlpModel::loss(const Matrix& batch, std::span<const int> labels, Mode mode) const {
    const Vector logits = mlp_forward_stateless(net_, batch, mode).logits;
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) total += sigmoid_ce_loss(logits[i], labels[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(logits.size());
}

namespace {

double flatten(const MlpForward& fwd, const MlpGradients& g, std::span<const int> labels, std::vector<Vector>& grads) {
    grads.clear();
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        grads.emplace_back(Eigen::Map<const Vector>(g.weights[l].data(), g.weights[l].size()));
        grads.push_back(g.gamma[l]);
        grads.push_back(g.beta[l]);
    }
    grads.push_back(g.readout);
    grads.push_back(Vector::Constant(1, g.readout_bias));
    double total = 0.0;
    for (Eigen::Index i = 0; i < fwd.logits.size(); ++i) total += sigmoid_ce_loss(fwd.logits[i], labels[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(fwd.logits.size());
}

}  // namespace

double MlpModel::loss_and_gradients(const Matrix& batch, std::span<const int> labels, Mode mode,
                                    std::vector<Vector>& grads) const {
    const MlpForward fwd = mlp_forward_stateless(net_, batch, mode);
    return flatten(fwd, mlp_backward(net_, fwd.cache, labels), labels, grads);
}

double MlpModel::train_step_gradients(const Matrix& batch, std::span<const int> labels, std::vector<Vector>& grads) {
    const MlpForward fwd = mlp_forward(net_, batch, Mode::Train);
    return flatten(fwd, mlp_backward(net_, fwd.cache, labels), labels, grads);
}

std::vector<ParamBlock> MlpModel::parameters() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < net_.weights.size(); ++l) {
        const std::string tag = "layer" + std::to_string(l);
        out.push_back({tag + ".weight", {net_.weights[l].data(), static_cast<std::size_t>(net_.weights[l].size())}});
        out.push_back({tag + ".gamma", {net_.norms[l].gamma.data(), static_cast<std::size_t>(net_.norms[l].gamma.size())}});
        out.push_back({tag + ".beta", {net_.norms[l].beta.data(), static_cast<std::size_t>(net_.norms[l].beta.size())}});
    }
    out.push_back({"readout.weight", {net_.readout.data(), static_cast<std::size_t>(net_.readout.size())}});
    out.push_back({"readout.bias", {&net_.readout_bias, 1}});
    return out;
}

}  // namespace spheres
