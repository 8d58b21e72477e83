#include "difflab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difflab {

Mlp::Mlp(Arch arch, Seed init_seed) : arch_(arch) {
    if (arch_.x_dim < 1 || arch_.out_dim < 1 || arch_.hidden < 1 || arch_.n_hidden_layers < 1)
        throw std::invalid_argument("Mlp: invalid architecture");
    const int in = input_dim();
    layer_in_ = {in};
    layer_out_ = {arch_.hidden};
    for (int l = 1; l < arch_.n_hidden_layers; ++l) {
        layer_in_.push_back(arch_.hidden);
        layer_out_.push_back(arch_.hidden);
    }
    layer_in_.push_back(arch_.hidden);
    layer_out_.push_back(arch_.out_dim);

    std::size_t total = 0;
    for (std::size_t l = 0; l < layer_in_.size(); ++l) {
        w_off_.push_back(total);
        total += static_cast<std::size_t>(layer_in_[l]) * layer_out_[l];
        b_off_.push_back(total);
        total += layer_out_[l];
    }
    if (arch_.n_labels > 0)
        total += static_cast<std::size_t>(arch_.n_labels + 1) * arch_.cond_dim;
    params_.assign(total, 0.0);

    Rng rng(init_seed);
    for (std::size_t l = 0; l < layer_in_.size(); ++l) {
        const double scale = std::sqrt(1.0 / layer_in_[l]);
        double* w = params_.data() + w_off_[l];
        const std::size_t n = static_cast<std::size_t>(layer_in_[l]) * layer_out_[l];
        for (std::size_t i = 0; i < n; ++i) w[i] = scale * rng.normal();
    }
    if (arch_.n_labels > 0) {
        double* e = params_.data() + embed_offset();
        const std::size_t n = static_cast<std::size_t>(arch_.n_labels + 1) * arch_.cond_dim;
        for (std::size_t i = 0; i < n; ++i) e[i] = 0.1 * rng.normal();
    }
}

int Mlp::input_dim() const {
    return arch_.x_dim + arch_.time_feat + (arch_.n_labels > 0 ? arch_.cond_dim : 0);
}

std::size_t Mlp::embed_offset() const {
    return b_off_.back() + static_cast<std::size_t>(layer_out_.back());
}

void Mlp::assemble_input(std::span<const double> x, std::span<const double> tfeat,
                         std::optional<int> cond, std::vector<double>& in) const {
    if (static_cast<int>(x.size()) != arch_.x_dim)
        throw std::invalid_argument("Mlp: x dimension mismatch");
    if (static_cast<int>(tfeat.size()) != arch_.time_feat)
        throw std::invalid_argument("Mlp: time feature size mismatch");
    in.resize(input_dim());
    std::copy(x.begin(), x.end(), in.begin());
    std::copy(tfeat.begin(), tfeat.end(), in.begin() + arch_.x_dim);
    if (arch_.n_labels > 0) {
        int row = arch_.n_labels;  // null row
        if (cond.has_value()) {
            if (*cond < 0 || *cond >= arch_.n_labels)
                throw std::invalid_argument("Mlp: condition label out of range");
            row = *cond;
        }
        const double* e = params_.data() + embed_offset() +
                          static_cast<std::size_t>(row) * arch_.cond_dim;
        std::copy(e, e + arch_.cond_dim, in.begin() + arch_.x_dim + arch_.time_feat);
    } else if (cond.has_value()) {
        throw std::invalid_argument("Mlp: condition supplied to an unconditional net");
    }
}

Vec Mlp::forward(std::span<const double> x, std::span<const double> tfeat,
                 std::optional<int> cond) const {
    Tape tape;
    return forward(x, tfeat, cond, tape);
}

Vec Mlp::forward(std::span<const double> x, std::span<const double> tfeat,
                 std::optional<int> cond, Tape& tape) const {
    assemble_input(x, tfeat, cond, tape.input);
    const std::size_t L = layer_in_.size();
    tape.pre.resize(L);
    tape.act.resize(L);
    const std::vector<double>* cur = &tape.input;
    for (std::size_t l = 0; l < L; ++l) {
        const int nin = layer_in_[l];
        const int nout = layer_out_[l];
        auto& pre = tape.pre[l];
        pre.assign(params_.begin() + b_off_[l], params_.begin() + b_off_[l] + nout);
        const double* w = params_.data() + w_off_[l];
        const double* in = cur->data();
        for (int o = 0; o < nout; ++o) {
            const double* wrow = w + static_cast<std::size_t>(o) * nin;
            double s = pre[o];
            for (int i = 0; i < nin; ++i) s += wrow[i] * in[i];
            pre[o] = s;
        }
        auto& act = tape.act[l];
        if (l + 1 < L) {
            act.resize(nout);
            for (int o = 0; o < nout; ++o) act[o] = std::tanh(pre[o]);
        } else {
            act = pre;  // linear head
        }
        cur = &act;
    }
    return tape.act.back();
}

void Mlp::backward(const Tape& tape, std::span<const double> dl_dout, std::span<double> grad,
                   std::optional<int> cond) const {
    const std::size_t L = layer_in_.size();
    std::vector<double>& delta = const_cast<Tape&>(tape).delta;
    std::vector<double>& delta_next = const_cast<Tape&>(tape).delta_next;
    delta.assign(dl_dout.begin(), dl_dout.end());

    for (std::size_t l = L; l-- > 0;) {
        const int nin = layer_in_[l];
        const int nout = layer_out_[l];
        const std::vector<double>& in = l == 0 ? tape.input : tape.act[l - 1];
        // head is linear; hidden layers differentiate through tanh
        if (l + 1 < L) {
            for (int o = 0; o < nout; ++o) {
                const double a = tape.act[l][o];
                delta[o] *= 1.0 - a * a;
            }
        }
        double* gw = grad.data() + w_off_[l];
        double* gb = grad.data() + b_off_[l];
        for (int o = 0; o < nout; ++o) {
            const double d = delta[o];
            gb[o] += d;
            double* grow = gw + static_cast<std::size_t>(o) * nin;
            for (int i = 0; i < nin; ++i) grow[i] += d * in[i];
        }
        if (l > 0) {
            delta_next.assign(nin, 0.0);
            const double* w = params_.data() + w_off_[l];
            for (int o = 0; o < nout; ++o) {
                const double d = delta[o];
                const double* wrow = w + static_cast<std::size_t>(o) * nin;
                for (int i = 0; i < nin; ++i) delta_next[i] += d * wrow[i];
            }
            delta.swap(delta_next);
        } else if (arch_.n_labels > 0) {
            // gradient into the embedding row that fed the input
            delta_next.assign(nin, 0.0);
            const double* w = params_.data() + w_off_[0];
            for (int o = 0; o < nout; ++o) {
                const double d = delta[o];
                const double* wrow = w + static_cast<std::size_t>(o) * nin;
                for (int i = 0; i < nin; ++i) delta_next[i] += d * wrow[i];
            }
            const int row = cond.has_value() ? *cond : arch_.n_labels;
            double* ge = grad.data() + embed_offset() +
                         static_cast<std::size_t>(row) * arch_.cond_dim;
            const int base = arch_.x_dim + arch_.time_feat;
            for (int c = 0; c < arch_.cond_dim; ++c) ge[c] += delta_next[base + c];
        }
    }
}

Vec time_features_log_snr(double log_snr) {
    const double h = log_snr;
    return {h / 8.0,
            std::sin(0.25 * h), std::cos(0.25 * h),
            std::sin(0.5 * h),  std::cos(0.5 * h),
            std::sin(h),        std::cos(h),
            std::sin(2.0 * h),  std::cos(2.0 * h)};
}

Vec time_features_unit(double t01) {
    const double a = 6.283185307179586 * t01;
    return {t01,
            std::sin(a),       std::cos(a),
            std::sin(2.0 * a), std::cos(2.0 * a),
            std::sin(4.0 * a), std::cos(4.0 * a),
            std::sin(8.0 * a), std::cos(8.0 * a)};
}

MlpPredictor::MlpPredictor(Mlp net, std::shared_ptr<const Schedule> sched)
    : net_(std::move(net)), sched_(std::move(sched)) {
    if (!sched_) throw std::invalid_argument("MlpPredictor: null schedule");
}

Vec MlpPredictor::eps_hat(std::span<const double> x, int t, std::optional<int> cond) const {
    return net_.forward(x, time_features_log_snr(sched_->log_snr(t)), cond);
}

double vb_weight(int t, const Schedule& sched) {
    if (t < 2) throw std::out_of_range("vb_weight: defined for t >= 2");
    const double b = sched.beta(t);
    return b / (2.0 * (1.0 - b) * (1.0 - sched.alpha_bar(t - 1)));
}

namespace {

struct Adam {
    std::vector<double> m, v;
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

TrainResult run_training(Mlp& net, const std::function<RegressionSample(Rng&)>& make_sample,
                         const Schedule& sched, TrainConfig cfg) {
    TrainResult res;
    if (cfg.steps == 0) return res;
    if (cfg.steps < 0 || cfg.batch < 1) throw std::invalid_argument("train: bad config");

    Rng rng(Seed{cfg.seed, 0x7261696eull});  // training stream
    Adam opt(net.n_params());
    std::vector<double> grad(net.n_params());
    Mlp::Tape tape;
    Vec dl(net.arch().out_dim);

    for (int step = 1; step <= cfg.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const RegressionSample s = make_sample(rng);
            const Vec out =
                net.forward(s.x, time_features_log_snr(sched.log_snr(s.t)), s.cond, tape);
            double l = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double r = out[i] - s.eps_target[i];
                l += r * r;
                dl[i] = s.weight * 2.0 * r / cfg.batch;
            }
            loss += s.weight * l / cfg.batch;
            net.backward(tape, dl, grad, s.cond);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("train: divergent loss at step " + std::to_string(step));
        // linear decay to a tenth of the initial rate
        const double lr = cfg.lr * (1.0 - 0.9 * (step - 1) / std::max(1, cfg.steps - 1));
        opt.step(net.params(), grad, lr);
        if (step % cfg.log_every == 0 || step == cfg.steps)
            res.loss_curve.emplace_back(step, loss);
        res.final_loss = loss;
    }
    return res;
}

}  // namespace

TrainResult fit_eps(MlpPredictor& model, const std::function<RegressionSample(Rng&)>& make_sample,
                    TrainConfig cfg) {
    return run_training(model.net(), make_sample, model.schedule(), cfg);
}

TrainResult train_eps(MlpPredictor& model, const GaussianMixture& data, TrainConfig cfg) {
    const Schedule& sched = model.schedule();
    const int T = sched.steps();
    const int t_lo = cfg.weighting == TrainConfig::Weighting::Vb ? 2 : 1;
    if (cfg.weighting == TrainConfig::Weighting::Vb && T < 2)
        throw std::invalid_argument("train_eps: VB weighting needs T >= 2");

    auto make_sample = [&, t_lo, T](Rng& rng) {
        RegressionSample s;
        s.t = t_lo + static_cast<int>(rng.uniform() * (T - t_lo + 1));
        s.t = std::min(s.t, T);
        auto [x0, label] = data.draw_labeled(rng);
        const double a = std::sqrt(sched.alpha_bar(s.t));
        const double n = std::sqrt(1.0 - sched.alpha_bar(s.t));
        s.eps_target = rng.normal_vec(data.dim());
        s.x.resize(data.dim());
        for (std::size_t i = 0; i < data.dim(); ++i)
            s.x[i] = a * x0[i] + n * s.eps_target[i];
        s.weight = cfg.weighting == TrainConfig::Weighting::Vb ? vb_weight(s.t, sched) : 1.0;
        if (cfg.conditional) {
            const bool drop = rng.uniform() < cfg.p_drop;
            if (!drop) s.cond = label;
        }
        return s;
    };
    return fit_eps(model, make_sample, cfg);
}

double gradient_max_rel_error(const Mlp& net, int n_probe, Seed seed) {
    Mlp probe = net;
    Rng rng(seed);
    const int xd = probe.arch().x_dim;
    const int od = probe.arch().out_dim;

    // a small fixed batch with a quadratic loss against random targets
    const int B = 4;
    std::vector<Vec> xs(B), targets(B), tf(B);
    std::vector<std::optional<int>> conds(B);
    for (int b = 0; b < B; ++b) {
        xs[b] = rng.normal_vec(xd);
        targets[b] = rng.normal_vec(od);
        tf[b] = time_features_log_snr(2.0 * rng.normal());
        if (probe.arch().n_labels > 0 && b % 2 == 0)
            conds[b] = b % probe.arch().n_labels;
    }
    auto loss_of = [&]() {
        double l = 0.0;
        for (int b = 0; b < B; ++b) {
            const Vec out = probe.forward(xs[b], tf[b], conds[b]);
            for (int i = 0; i < od; ++i) {
                const double r = out[i] - targets[b][i];
                l += r * r;
            }
        }
        return l;
    };

    std::vector<double> grad(probe.n_params(), 0.0);
    Mlp::Tape tape;
    Vec dl(od);
    for (int b = 0; b < B; ++b) {
        const Vec out = probe.forward(xs[b], tf[b], conds[b], tape);
        for (int i = 0; i < od; ++i) dl[i] = 2.0 * (out[i] - targets[b][i]);
        probe.backward(tape, dl, grad, conds[b]);
    }

    double worst = 0.0;
    for (int k = 0; k < n_probe; ++k) {
        const std::size_t idx = rng.next_u64() % probe.n_params();
        const double h = 1e-6 * std::max(1.0, std::abs(probe.params()[idx]));
        const double save = probe.params()[idx];
        probe.params()[idx] = save + h;
        const double lp = loss_of();
        probe.params()[idx] = save - h;
        const double lm = loss_of();
        probe.params()[idx] = save;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[idx]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[idx]) / denom);
    }
    return worst;
}

Vec VelocityMlp::velocity(std::span<const double> x, double t) const {
    return net_.forward(x, time_features_unit(t), std::nullopt);
}

VelocityFn VelocityMlp::as_fn() const {
    return [this](std::span<const double> x, double t) { return velocity(x, t); };
}

namespace {

double flow_loss_impl(const VelocityFn& v, const GaussianMixture& data, const Interpolant& interp,
                      Coupling coupling, int n_samples, const std::function<double(double)>& w,
                      Seed seed, double t_max, bool marginal_target) {
    if (n_samples < 1) throw std::invalid_argument("flow loss: n_samples must be >= 1");
    Rng rng(seed);
    double acc = 0.0;
    for (int k = 0; k < n_samples; ++k) {
        const double t = t_max * rng.uniform();
        const PathSample ps = sample_path(data, interp, t, rng, coupling);
        const Vec pred = v(ps.z, t);
        const Vec target = marginal_target ? marginal_velocity(data, interp, t, ps.z) : ps.u;
        acc += w(t) * sq_dist(pred, target);
    }
    return acc / n_samples;
}

}  // namespace

double cfm_loss(const VelocityFn& v, const GaussianMixture& data, const Interpolant& interp,
                Coupling coupling, int n_samples, const std::function<double(double)>& w,
                Seed seed, double t_max) {
    return flow_loss_impl(v, data, interp, coupling, n_samples, w, seed, t_max, false);
}

double mfm_loss(const VelocityFn& v, const GaussianMixture& data, const Interpolant& interp,
                Coupling coupling, int n_samples, const std::function<double(double)>& w,
                Seed seed, double t_max) {
    return flow_loss_impl(v, data, interp, coupling, n_samples, w, seed, t_max, true);
}

TrainResult train_velocity(VelocityMlp& model, const GaussianMixture& data,
                           const Interpolant& interp, Coupling coupling,
                           const std::function<double(double)>& w, TrainConfig cfg,
                           double t_max) {
    TrainResult res;
    if (cfg.steps == 0) return res;
    Mlp& net = model.net();
    Rng rng(Seed{cfg.seed, 0x76656c6full});
    Adam opt(net.n_params());
    std::vector<double> grad(net.n_params());
    Mlp::Tape tape;
    Vec dl(net.arch().out_dim);

    for (int step = 1; step <= cfg.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const double t = t_max * rng.uniform();
            const PathSample ps = sample_path(data, interp, t, rng, coupling);
            const Vec out = net.forward(ps.z, time_features_unit(t), std::nullopt, tape);
            const double wt = w(t);
            double l = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double r = out[i] - ps.u[i];
                l += r * r;
                dl[i] = wt * 2.0 * r / cfg.batch;
            }
            loss += wt * l / cfg.batch;
            net.backward(tape, dl, grad, std::nullopt);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("train_velocity: divergent loss at step " +
                                     std::to_string(step));
        const double lr = cfg.lr * (1.0 - 0.9 * (step - 1) / std::max(1, cfg.steps - 1));
        opt.step(net.params(), grad, lr);
        if (step % cfg.log_every == 0 || step == cfg.steps)
            res.loss_curve.emplace_back(step, loss);
        res.final_loss = loss;
    }
    return res;
}

}  // namespace difflab
