#pragma once

// The two model families: the quadratic network, whose decision boundary is
// an ellipsoid with an analytic α spectrum, and a ReLU MLP with batch
// normalisation on every hidden layer. Both produce a single logit; class 1
// (outer shell) is predicted when the logit is positive.

#include "spheres/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spheres {

enum class Mode { Train, Eval };

/// Predicted class for a logit: 1 iff logit > 0.
inline int predicted_class(double logit) { return logit > 0.0 ? 1 : 0; }

/// Numerically stable sigmoid cross-entropy, max(l,0) − l·y + log1p(exp(−|l|)).
double sigmoid_ce_loss(double logit, int label) noexcept;
/// d loss / d logit = sigmoid(l) − y.
double sigmoid_ce_grad(double logit, int label) noexcept;
double sigmoid(double x) noexcept;

// ---------------------------------------------------------------------------
// Quadratic network: logit = w · Σ_j (row_j · x)² + b

struct QuadraticNet {
    Matrix w1;  ///< h × n
    double w = 1.0;
    double b = -1.0;

    std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
};

/// W1 entries ~ N(0, 1/n), w = 1, b = −1.
QuadraticNet make_quadratic_net(std::size_t n, std::size_t h, RngStream& stream);

double quad_logit(const QuadraticNet& net, const Vector& x);
Vector quad_logits(const QuadraticNet& net, const Matrix& batch);

/// α_i = w·s_i²/(−b) for the singular values s_i of W1, descending.
struct AlphaSpectrum {
    Vector alphas;
    double radius = 1.3;
    /// Set when h < n: the n − h missing directions carry α = 0.
    bool padded = false;
};

/// Throws UnsupportedRegimeError when b >= 0.
AlphaSpectrum alpha_spectrum(const QuadraticNet& net, double radius);

struct PerfectionCheck {
    bool perfect = false;
    std::size_t violations = 0;  ///< α_i outside the closed interval [1/R², 1]
};

PerfectionCheck is_perfect(const AlphaSpectrum& spectrum);

struct PerfectInitTargets {
    double p_inner = 0.0016;  ///< sigmoid output on the inner shell
    double p_outer = 0.9994;  ///< sigmoid output on the outer shell
};

/// Quadratic net with W1ᵀW1 = s²·I (orthonormal columns from the QR of a
/// Gaussian h×n matrix, scaled by s), w = 1, and (s², b) solving
/// w·s² + b = logit(p_inner), w·s²·R² + b = logit(p_outer).
/// Requires h >= n. Throws InfeasibleError if the resulting α leaves [1/R², 1].
QuadraticNet quad_perfect_init(std::size_t n, std::size_t h, double radius,
                               const PerfectInitTargets& targets, RngStream& stream);

struct QuadForwardCache {
    const QuadraticNet* owner = nullptr;
    Matrix input;   ///< B × n
    Matrix hidden;  ///< B × h, pre-square activations W1·x
    Vector logits;
};

QuadForwardCache quad_forward(const QuadraticNet& net, const Matrix& batch);

struct QuadGradients {
    Matrix w1;
    double w = 0.0;
    double b = 0.0;
};

/// Gradients of the mean sigmoid-CE loss over the cached batch.
QuadGradients quad_backward(const QuadraticNet& net, const QuadForwardCache& cache,
                            std::span<const int> labels);

// ---------------------------------------------------------------------------
// ReLU MLP: per hidden layer  h = W·a  →  batch norm (γ, β)  →  ReLU;
// readout  logit = v·a + c  without normalisation. Hidden affines carry no
// bias because the batch-norm shift β already provides one.

struct BatchNormParams {
    Vector gamma;
    Vector beta;
    Vector running_mean;
    Vector running_var;
};

struct MlpNet {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  ///< widths, immutable after construction
    std::vector<Matrix> weights;      ///< layer l: hidden[l] × fan_in
    std::vector<BatchNormParams> norms;
    Vector readout;                   ///< hidden.back()
    double readout_bias = 0.0;
    double momentum = 0.99;           ///< running ← momentum·running + (1−momentum)·batch
    double epsilon = 1e-5;
};

/// Hidden weights ~ N(0, 2/fan_in), readout ~ N(0, 1/fan_in), γ = 1, β = 0,
/// running mean 0, running variance 1.
MlpNet make_mlp(std::size_t n, const std::vector<std::size_t>& hidden, RngStream& stream);

struct MlpForwardCache {
    const MlpNet* owner = nullptr;
    Mode mode = Mode::Eval;
    std::vector<Matrix> inputs;      ///< input to layer l (inputs[0] is the batch)
    std::vector<Matrix> normalized;  ///< x̂ per hidden layer
    std::vector<Vector> mean;        ///< statistics used for normalisation
    std::vector<Vector> variance;    ///< biased batch variance in train mode, running var in eval
    std::vector<Vector> inv_std;
    Matrix last_hidden;              ///< activations feeding the readout
    Vector logits;
};

struct MlpForward {
    Vector logits;
    MlpForwardCache cache;
};

/// Forward pass. Train mode normalises with batch statistics and folds them
/// into the running averages (unbiased variance); eval mode uses the running
/// averages. Throws DomainError for a batch of one in train mode.
MlpForward mlp_forward(MlpNet& net, const Matrix& batch, Mode mode);

/// Forward pass that never touches the running statistics.
MlpForward mlp_forward_stateless(const MlpNet& net, const Matrix& batch, Mode mode);

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> gamma;
    std::vector<Vector> beta;
    Vector readout;
    double readout_bias = 0.0;
};

/// Gradients of the mean sigmoid-CE loss. In train mode the batch statistics
/// are differentiated through; in eval mode they are constants.
MlpGradients mlp_backward(const MlpNet& net, const MlpForwardCache& cache, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Family-agnostic interface used by training, attacks and the CLI.

enum class Family { Quadratic, Mlp };
std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// A view of one parameter tensor, flattened.
struct ParamBlock {
    std::string name;
    std::span<double> values;
};

class Model {
public:
    virtual ~Model() = default;

    virtual Family family() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t parameter_count() const = 0;
    virtual std::unique_ptr<Model> clone() const = 0;

    /// Eval-mode logits, one per row.
    virtual Vector logits(const Matrix& batch) const = 0;

    /// Eval-mode logits, writing d logit_i / d x_i into row i of `grad`.
    /// The loss gradient is (sigmoid(l) − y)·grad; attacks use this form so that
    /// the ascent direction survives when the loss saturates.
    virtual Vector logit_gradients(const Matrix& batch, Matrix& grad) const = 0;

    /// Mean loss in `mode` without side effects.
    virtual double loss(const Matrix& batch, std::span<const int> labels, Mode mode) const = 0;

    /// Mean loss and its gradient in `mode` without side effects. Gradient
    /// blocks follow the order of parameters().
    virtual double loss_and_gradients(const Matrix& batch, std::span<const int> labels, Mode mode,
                                      std::vector<Vector>& grads) const = 0;

    /// One training-mode forward/backward pass; also updates running statistics.
    virtual double train_step_gradients(const Matrix& batch, std::span<const int> labels,
                                        std::vector<Vector>& grads) = 0;

    virtual std::vector<ParamBlock> parameters() = 0;
};

class QuadraticModel final : public Model {
public:
    explicit QuadraticModel(QuadraticNet net) : net_(std::move(net)) {}

    const QuadraticNet& net() const { return net_; }
    QuadraticNet& net() { return net_; }

    Family family() const override { return Family::Quadratic; }
    std::size_t input_dim() const override { return net_.input_dim(); }
    std::size_t parameter_count() const override;
    std::unique_ptr<Model> clone() const override;
    Vector logits(const Matrix& batch) const override;
    Vector logit_gradients(const Matrix& batch, Matrix& grad) const override;
    double loss(const Matrix& batch, std::span<const int> labels, Mode mode) const override;
    double loss_and_gradients(const Matrix& batch, std::span<const int> labels, Mode mode,
                              std::vector<Vector>& grads) const override;
    double train_step_gradients(const Matrix& batch, std::span<const int> labels,
                                std::vector<Vector>& grads) override;
    std::vector<ParamBlock> parameters() override;

private:
    QuadraticNet net_;
};

class MlpModel final : public Model {
public:
    explicit MlpModel(MlpNet net) : net_(std::move(net)) {}

    const MlpNet& net() const { return net_; }
    MlpNet& net() { return net_; }

    Family family() const override { return Family::Mlp; }
    std::size_t input_dim() const override { return net_.input_dim; }
    std::size_t parameter_count() const override;
    std::unique_ptr<Model> clone() const override;
    Vector logits(const Matrix& batch) const override;
    Vector logit_gradients(const Matrix& batch, Matrix& grad) const override;
    double loss(const Matrix& batch, std::span<const int> labels, Mode mode) const override;
    double loss_and_gradients(const Matrix& batch, std::span<const int> labels, Mode mode,
                              std::vector<Vector>& grads) const override;
    double train_step_gradients(const Matrix& batch, std::span<const int> labels,
                                std::vector<Vector>& grads) override;
    std::vector<ParamBlock> parameters() override;

private:
    MlpNet net_;
};

/// Largest relative difference between loss_and_gradients and central finite
/// differences of loss, over every parameter. Relative error is
/// |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
/// Evaluates 2·parameter_count() losses; keep the model small.
double gradient_check(const Model& model, const Matrix& batch, std::span<const int> labels, Mode mode,
                      double eps = 1e-5);

}  // namespace spheres
