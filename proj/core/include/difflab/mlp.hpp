#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "difflab/flow.hpp"
#include "difflab/linalg.hpp"
#include "difflab/predictor.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// Fully connected net with tanh hidden layers and a linear head. The input
/// is [x, time features, condition embedding]; the embedding table carries
/// one extra "null" row used when the condition is dropped.
class Mlp {
public:
    struct Arch {
        int x_dim = 1;
        int out_dim = 1;
        int hidden = 128;
        int n_hidden_layers = 3;
        int time_feat = 9;
        int n_labels = 0;  // 0 -> unconditional (no embedding table)
        int cond_dim = 4;
    };

    Mlp(Arch arch, Seed init_seed);

    [[nodiscard]] const Arch& arch() const { return arch_; }
    [[nodiscard]] int input_dim() const;
    [[nodiscard]] std::size_t n_params() const { return params_.size(); }
    [[nodiscard]] std::vector<double>& params() { return params_; }
    [[nodiscard]] const std::vector<double>& params() const { return params_; }

    /// Reusable forward/backward scratch (activations).
    struct Tape {
        std::vector<double> input;
        std::vector<std::vector<double>> pre;   // pre-activations per layer
        std::vector<std::vector<double>> act;   // activations per layer
        std::vector<double> delta, delta_next;
    };

    Vec forward(std::span<const double> x, std::span<const double> tfeat,
                std::optional<int> cond) const;
    Vec forward(std::span<const double> x, std::span<const double> tfeat, std::optional<int> cond,
                Tape& tape) const;
    /// Accumulates dL/dparams into grad given dL/doutput for the tape's input.
    void backward(const Tape& tape, std::span<const double> dl_dout, std::span<double> grad,
                  std::optional<int> cond) const;

private:
    void assemble_input(std::span<const double> x, std::span<const double> tfeat,
                        std::optional<int> cond, std::vector<double>& in) const;
    [[nodiscard]] std::size_t embed_offset() const;

    Arch arch_;
    std::vector<int> layer_in_, layer_out_;  // per dense layer
    std::vector<std::size_t> w_off_, b_off_;
    std::vector<double> params_;
};

/// Time features for a discrete step: scaled log-SNR plus sin/cos harmonics.
Vec time_features_log_snr(double log_snr);
/// Time features for a unit-interval clock (velocity models).
Vec time_features_unit(double t01);

/// Trainable noise predictor wrapping an Mlp over (x, log-SNR features, label).
class MlpPredictor final : public Predictor {
public:
    MlpPredictor(Mlp net, std::shared_ptr<const Schedule> sched);

    [[nodiscard]] Vec eps_hat(std::span<const double> x, int t,
                              std::optional<int> cond = std::nullopt) const override;
    [[nodiscard]] std::size_t dim() const override { return net_.arch().x_dim; }
    [[nodiscard]] const Schedule& schedule() const override { return *sched_; }

    [[nodiscard]] Mlp& net() { return net_; }
    [[nodiscard]] const Mlp& net() const { return net_; }
    [[nodiscard]] std::shared_ptr<const Schedule> schedule_ptr() const { return sched_; }

private:
    Mlp net_;
    std::shared_ptr<const Schedule> sched_;
};

struct TrainConfig {
    int steps = 3000;
    int batch = 128;
    double lr = 2e-3;
    enum class Weighting { Uniform, Vb } weighting = Weighting::Uniform;
    double p_drop = 0.1;          // condition dropout probability
    bool conditional = false;     // feed labels during training
    std::uint64_t seed = 0;
    int log_every = 50;
};

struct TrainResult {
    std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
    double final_loss = 0.0;
};

/// VB weight w_t = beta_t / (2 (1-beta_t)(1-alpha_bar_{t-1})); defined for t >= 2.
double vb_weight(int t, const Schedule& sched);

/// Minimises sum_t w(t) E || eps - eps_hat(x_t, t, c) ||^2 with pairs from the
/// forward reparameterisation. Throws on divergent (non-finite) loss.
TrainResult train_eps(MlpPredictor& model, const GaussianMixture& data, TrainConfig cfg);

/// One supervised sample for generic eps-space regression (distillation).
struct RegressionSample {
    Vec x;
    int t = 1;
    std::optional<int> cond;
    Vec eps_target;
    double weight = 1.0;
};

TrainResult fit_eps(MlpPredictor& model, const std::function<RegressionSample(Rng&)>& make_sample,
                    TrainConfig cfg);

/// Largest relative disagreement between backprop and central finite
/// differences over n_probe randomly chosen parameters.
double gradient_max_rel_error(const Mlp& net, int n_probe, Seed seed);

// --- velocity models / flow-matching objectives ---

/// Velocity field over the unit clock, v(x, t).
using VelocityFn = std::function<Vec(std::span<const double>, double)>;

class VelocityMlp {
public:
    VelocityMlp(Mlp net) : net_(std::move(net)) {}
    [[nodiscard]] Vec velocity(std::span<const double> x, double t) const;
    [[nodiscard]] Mlp& net() { return net_; }
    [[nodiscard]] const Mlp& net() const { return net_; }
    [[nodiscard]] VelocityFn as_fn() const;

private:
    Mlp net_;
};

/// Monte-Carlo conditional flow-matching loss E[w(t) ||v(Z_t, t) - U_t||^2]
/// with t ~ U(0, t_max) and endpoint pairs from the stated coupling.
double cfm_loss(const VelocityFn& v, const GaussianMixture& data, const Interpolant& interp,
                Coupling coupling, int n_samples, const std::function<double(double)>& w,
                Seed seed, double t_max = 1.0);

/// Marginal flow-matching loss against the analytic marginal velocity,
/// evaluated on the same path distribution.
double mfm_loss(const VelocityFn& v, const GaussianMixture& data, const Interpolant& interp,
                Coupling coupling, int n_samples, const std::function<double(double)>& w,
                Seed seed, double t_max = 1.0);

/// Trains a velocity MLP on the CFM objective.
TrainResult train_velocity(VelocityMlp& model, const GaussianMixture& data,
                           const Interpolant& interp, Coupling coupling,
                           const std::function<double(double)>& w, TrainConfig cfg,
                           double t_max = 1.0);

}  // namespace difflab
