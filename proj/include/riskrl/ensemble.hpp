#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "riskrl/dataset.hpp"
#include "riskrl/nn.hpp"

namespace riskrl {

struct ModelConfig {
    int members = 7;
    int elites = 5;
    int hidden_layers = 4;
    int hidden_width = 64;
    nn::Activation activation = nn::Activation::Swish;
    int epochs = 30;
    int batch_size = 256;
    double lr = 3e-4;
    double logvar_min = -10.0;
    double logvar_max = 2.0;
    int holdout_max = 1000;
    double holdout_frac = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        require(members >= 1 && elites >= 1 && elites <= members,
                "ModelConfig: need 1 <= elites <= members");
        require(hidden_layers >= 1 && hidden_width >= 1, "ModelConfig: bad network shape");
        require(epochs >= 1 && batch_size >= 1 && lr > 0, "ModelConfig: bad training params");
        require(logvar_min < logvar_max, "ModelConfig: logvar_min must be below logvar_max");
        require(holdout_max >= 1 && holdout_frac > 0 && holdout_frac < 1,
                "ModelConfig: bad holdout spec");
    }
};

/// Parameters of the training-free ensemble used by the Gaussian-mixture
/// analysis: member means drawn from N(mu0, sigma_e^2), shared output std
/// sigma_a, inputs ignored.
struct SyntheticGaussianSpec {
    double mu0 = 0.0;
    double sigma_e = 1.0;
    double sigma_a = 1.0;
    int n_members = 100;
};

/**
 * Feedforward net mapping concat(s, a) to a diagonal Gaussian over
 * concat(s', r): the first half of the output is the mean, the second half
 * the log-variance, soft-clamped into [logvar_min, logvar_max]. Bounds with
 * magnitude above 1e100 disable that side of the clamp. Mean and
 * log-variance live in normalized target space; the owning ensemble holds
 * the de-normalization statistics.
 */
class GaussianNet {
public:
    GaussianNet() = default;

    GaussianNet(int in_dim, int target_dim, const ModelConfig& cfg, Rng& rng)
        : lv_min_(cfg.logvar_min), lv_max_(cfg.logvar_max), target_dim_(target_dim) {
        std::vector<int> sizes{in_dim};
        for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_width);
        sizes.push_back(2 * target_dim);
        mlp_ = nn::Mlp(sizes, cfg.activation, rng);
    }

    int target_dim() const { return target_dim_; }
    nn::Mlp& mlp() { return mlp_; }
    const nn::Mlp& mlp() const { return mlp_; }
    double logvar_min() const { return lv_min_; }
    double logvar_max() const { return lv_max_; }
    void set_logvar_bounds(double lo, double hi) {
        lv_min_ = lo;
        lv_max_ = hi;
    }

    void predict(const MatrixXd& X, MatrixXd& mu, MatrixXd& logvar) const {
        const MatrixXd Y = mlp_.forward(X);
        split(Y, mu, logvar);
    }

    /// Mean per-sample Gaussian NLL on normalized targets.
    double nll(const MatrixXd& X, const MatrixXd& T) const {
        MatrixXd mu, lv;
        predict(X, mu, lv);
        return nll_value(mu, lv, T);
    }

    /// Mean NLL plus parameter gradients (through the log-variance clamp).
    double nll_and_grads(const MatrixXd& X, const MatrixXd& T,
                         std::vector<nn::LayerGrads>& grads, nn::Mlp::Cache& cache) const {
        const MatrixXd& Y = mlp_.forward(X, cache);
        const Eigen::Index n = X.rows(), d = target_dim_;
        MatrixXd mu = Y.leftCols(d);
        MatrixXd raw = Y.rightCols(d);
        MatrixXd lv(n, d), dlv_draw(n, d);
        clamp_with_deriv(raw, lv, dlv_draw);

        const double inv_n = 1.0 / static_cast<double>(n);
        MatrixXd inv_var = (-lv).array().exp();
        MatrixXd err = mu - T;
        const double loss =
            0.5 * inv_n *
            (err.array().square() * inv_var.array() + lv.array() + std::log(two_pi)).sum();

        MatrixXd dY(n, 2 * d);
        dY.leftCols(d) = inv_n * err.cwiseProduct(inv_var);
        dY.rightCols(d) =
            (0.5 * inv_n * (1.0 - (err.array().square() * inv_var.array()))).matrix()
                .cwiseProduct(dlv_draw);
        mlp_.backward(cache, dY, grads);
        return loss;
    }

    void write_text(std::ostream& os) const {
        os.precision(17);
        os << "gaussian-net " << target_dim_ << ' ' << lv_min_ << ' ' << lv_max_ << '\n';
        mlp_.write_text(os);
    }

    static GaussianNet read_text(std::istream& is) {
        std::string tag;
        is >> tag;
        ensure(tag == "gaussian-net", "GaussianNet::read_text: bad tag");
        GaussianNet net;
        is >> net.target_dim_ >> net.lv_min_ >> net.lv_max_;
        net.mlp_ = nn::Mlp::read_text(is);
        return net;
    }

private:
    void split(const MatrixXd& Y, MatrixXd& mu, MatrixXd& logvar) const {
        const Eigen::Index d = target_dim_;
        mu = Y.leftCols(d);
        MatrixXd raw = Y.rightCols(d);
        MatrixXd unused;
        clamp_with_deriv(raw, logvar, unused, false);
    }

    void clamp_with_deriv(const MatrixXd& raw, MatrixXd& lv, MatrixXd& deriv,
                          bool want_deriv = true) const {
        const bool hi_active = lv_max_ < 1e100;
        const bool lo_active = lv_min_ > -1e100;
        if (want_deriv) deriv = MatrixXd::Ones(raw.rows(), raw.cols());
        lv = raw;
        if (hi_active) {
            if (want_deriv)
                deriv = deriv.cwiseProduct(
                    lv.unaryExpr([m = lv_max_](double x) { return sigmoid(m - x); }));
            lv = lv.unaryExpr([m = lv_max_](double x) { return m - softplus(m - x); });
        }
        if (lo_active) {
            if (want_deriv)
                deriv = deriv.cwiseProduct(
                    lv.unaryExpr([m = lv_min_](double x) { return sigmoid(x - m); }));
            lv = lv.unaryExpr([m = lv_min_](double x) { return m + softplus(x - m); });
        }
    }

    double nll_value(const MatrixXd& mu, const MatrixXd& lv, const MatrixXd& T) const {
        const double n = static_cast<double>(T.rows());
        return 0.5 *
               ((mu - T).array().square() * (-lv).array().exp() + lv.array() +
                std::log(two_pi))
                   .sum() /
               n;
    }

    nn::Mlp mlp_;
    double lv_min_ = -10.0, lv_max_ = 2.0;
    int target_dim_ = 0;
};

struct FitDiagnostics {
    std::vector<numvec> train_nll; // [member][epoch]
    numvec holdout_nll;            // [member]
    std::vector<int> elites;
    int holdout_size = 0;
};

/**
 * Belief over transition functions: uniform mixture over the elite members,
 * each a GaussianNet over (s', r). Sampling a successor draws a uniform
 * random elite, then samples its diagonal Gaussian.
 */
class GaussianEnsemble {
public:
    GaussianEnsemble() = default;

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    int member_count() const { return static_cast<int>(members_.size()); }
    const std::vector<int>& elites() const { return elites_; }
    const Normalizer& input_normalizer() const { return input_norm_; }
    const Normalizer& target_normalizer() const { return target_norm_; }
    const ModelConfig& config() const { return config_; }
    bool trained() const { return trained_; }

    /// m i.i.d. draws of (next_state, reward) from the elite mixture.
    std::vector<std::pair<VectorXd, double>> sample_successors(const VectorXd& state,
                                                               const VectorXd& action, int m,
                                                               Rng& rng) const {
        require(m >= 1, "sample_successors: m must be >= 1");
        MatrixXd states(1, state_dim_), actions(1, action_dim_);
        states.row(0) = state.transpose();
        actions.row(0) = action.transpose();
        MatrixXd next;
        VectorXd rewards;
        sample_batch(states, actions, m, rng, next, rewards);
        std::vector<std::pair<VectorXd, double>> out(m);
        for (int j = 0; j < m; ++j) out[j] = {next.row(j).transpose(), rewards(j)};
        return out;
    }

    /**
     * Batched sampling: for each of the n input rows draws m candidates.
     * Row i*m + j of the outputs is candidate j of input row i. Draw order
     * is fixed (row-major), so results depend only on the rng state.
     */
    void sample_batch(const MatrixXd& states, const MatrixXd& actions, int m, Rng& rng,
                      MatrixXd& next_states, VectorXd& rewards) const {
        ensure(trained_, "GaussianEnsemble: sampling from an untrained ensemble");
        require(states.rows() == actions.rows(), "sample_batch: row count mismatch");
        const Eigen::Index n = states.rows();
        const int d = state_dim_ + 1;

        MatrixXd X(n, state_dim_ + action_dim_);
        X << states, actions;
        const MatrixXd Xn = input_norm_.apply(X);

        const int ne = static_cast<int>(elites_.size());
        std::vector<MatrixXd> mus(ne), stds(ne);
        for (int e = 0; e < ne; ++e) {
            MatrixXd lv;
            members_[elites_[e]].predict(Xn, mus[e], lv);
            stds[e] = (0.5 * lv).array().exp();
        }

        next_states.resize(n * m, state_dim_);
        rewards.resize(n * m);
        VectorXd z(d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const int e = rng.below(ne);
                for (int k = 0; k < d; ++k)
                    z(k) = mus[e](i, k) + stds[e](i, k) * rng.normal();
                const VectorXd t = target_norm_.invert_one(z);
                next_states.row(i * m + j) = t.head(state_dim_).transpose();
                rewards(i * m + j) = t(state_dim_);
            }
    }

    /// Per-elite predicted mean and std of (s', r) in original units.
    void elite_predictions(const MatrixXd& states, const MatrixXd& actions,
                           std::vector<MatrixXd>& means, std::vector<MatrixXd>& sds) const {
        ensure(trained_, "GaussianEnsemble: untrained");
        MatrixXd X(states.rows(), state_dim_ + action_dim_);
        X << states, actions;
        const MatrixXd Xn = input_norm_.apply(X);
        means.clear();
        sds.clear();
        for (int e : elites_) {
            MatrixXd mu, lv;
            members_[e].predict(Xn, mu, lv);
            means.push_back(target_norm_.invert(mu));
            MatrixXd sd = (0.5 * lv).array().exp();
            sds.push_back(sd.array().rowwise() * target_norm_.scale.transpose().array());
        }
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        ensure(os.good(), "GaussianEnsemble::save: cannot open " + path);
        os.precision(17);
        os << "riskrl-ensemble 1\n";
        os << state_dim_ << ' ' << action_dim_ << ' ' << members_.size() << ' '
           << elites_.size() << '\n';
        for (int e : elites_) os << e << ' ';
        os << '\n';
        os << config_.members << ' ' << config_.elites << ' ' << config_.hidden_layers << ' '
           << config_.hidden_width << ' ' << nn::to_string(config_.activation) << ' '
           << config_.epochs << ' ' << config_.batch_size << ' ' << config_.lr << ' '
           << config_.logvar_min << ' ' << config_.logvar_max << ' ' << config_.holdout_max
           << ' ' << config_.holdout_frac << ' ' << config_.seed << '\n';
        write_normalizer(os, input_norm_);
        write_normalizer(os, target_norm_);
        for (const auto& net : members_) net.write_text(os);
        ensure(os.good(), "GaussianEnsemble::save: write failure");
    }

    static GaussianEnsemble load(const std::string& path) {
        std::ifstream is(path);
        ensure(is.good(), "GaussianEnsemble::load: cannot open " + path);
        std::string magic;
        int version = 0;
        is >> magic >> version;
        ensure(magic == "riskrl-ensemble" && version == 1,
               "GaussianEnsemble::load: not an ensemble checkpoint: " + path);
        GaussianEnsemble ens;
        std::size_t n_members = 0, n_elites = 0;
        is >> ens.state_dim_ >> ens.action_dim_ >> n_members >> n_elites;
        ens.elites_.resize(n_elites);
        for (auto& e : ens.elites_) is >> e;
        std::string act;
        is >> ens.config_.members >> ens.config_.elites >> ens.config_.hidden_layers >>
            ens.config_.hidden_width >> act >> ens.config_.epochs >> ens.config_.batch_size >>
            ens.config_.lr >> ens.config_.logvar_min >> ens.config_.logvar_max >>
            ens.config_.holdout_max >> ens.config_.holdout_frac >> ens.config_.seed;
        ens.config_.activation = nn::activation_from_string(act);
        ens.input_norm_ = read_normalizer(is);
        ens.target_norm_ = read_normalizer(is);
        ens.members_.resize(n_members);
        for (auto& net : ens.members_) net = GaussianNet::read_text(is);
        ensure(!is.fail(), "GaussianEnsemble::load: truncated checkpoint");
        ens.trained_ = true;
        return ens;
    }

    friend GaussianEnsemble fit_ensemble(const OfflineDataset&, const ModelConfig&,
                                         FitDiagnostics*);
    friend GaussianEnsemble build_synthetic_ensemble(const SyntheticGaussianSpec&, Rng&);

private:
    static void write_normalizer(std::ostream& os, const Normalizer& n) {
        os << n.mean.size() << '\n';
        for (int i = 0; i < n.mean.size(); ++i) os << n.mean(i) << ' ';
        os << '\n';
        for (int i = 0; i < n.scale.size(); ++i) os << n.scale(i) << ' ';
        os << '\n';
    }

    static Normalizer read_normalizer(std::istream& is) {
        int d = 0;
        is >> d;
        ensure(d >= 1 && d < 1 << 20, "read_normalizer: bad dimension");
        Normalizer n;
        n.mean.resize(d);
        n.scale.resize(d);
        for (int i = 0; i < d; ++i) is >> n.mean(i);
        for (int i = 0; i < d; ++i) is >> n.scale(i);
        return n;
    }

    std::vector<GaussianNet> members_;
    std::vector<int> elites_;
    Normalizer input_norm_, target_norm_;
    ModelConfig config_;
    int state_dim_ = 0, action_dim_ = 0;
    bool trained_ = false;
};

/**
 * Maximum-likelihood ensemble fit. All members share one train/holdout
 * split and normalization statistics (fitted on the training split only);
 * they differ in weight init and minibatch shuffling. Elites are the
 * members with the lowest holdout NLL.
 */
inline GaussianEnsemble fit_ensemble(const OfflineDataset& data, const ModelConfig& cfg,
                                     FitDiagnostics* diag = nullptr) {
    cfg.validate();
    data.validate();
    const std::size_t n = data.size();
    require(n >= 50, "fit_ensemble: insufficient data (need >= 50 records)");

    std::size_t holdout = std::min<std::size_t>(
        cfg.holdout_max, static_cast<std::size_t>(cfg.holdout_frac * static_cast<double>(n)));
    holdout = std::max<std::size_t>(holdout, 1);
    const std::size_t n_train = n - holdout;
    require(n_train >= 10, "fit_ensemble: training split too small");

    Rng split_rng(derive_seed(cfg.seed, 101));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[split_rng.below(static_cast<int>(i))]);

    const MatrixXd X_all = data.inputs();
    const MatrixXd T_all = data.targets();
    MatrixXd X_hold(holdout, X_all.cols()), T_hold(holdout, T_all.cols());
    MatrixXd X_train(n_train, X_all.cols()), T_train(n_train, T_all.cols());
    for (std::size_t i = 0; i < holdout; ++i) {
        X_hold.row(i) = X_all.row(perm[i]);
        T_hold.row(i) = T_all.row(perm[i]);
    }
    for (std::size_t i = 0; i < n_train; ++i) {
        X_train.row(i) = X_all.row(perm[holdout + i]);
        T_train.row(i) = T_all.row(perm[holdout + i]);
    }

    GaussianEnsemble ens;
    ens.state_dim_ = data.state_dim;
    ens.action_dim_ = data.action_dim;
    ens.config_ = cfg;
    ens.input_norm_ = Normalizer::fit(X_train);
    ens.target_norm_ = Normalizer::fit(T_train);

    const MatrixXd Xn_train = ens.input_norm_.apply(X_train);
    const MatrixXd Tn_train = ens.target_norm_.apply(T_train);
    const MatrixXd Xn_hold = ens.input_norm_.apply(X_hold);
    const MatrixXd Tn_hold = ens.target_norm_.apply(T_hold);

    if (diag) {
        diag->train_nll.assign(cfg.members, {});
        diag->holdout_nll.assign(cfg.members, 0.0);
        diag->holdout_size = static_cast<int>(holdout);
    }

    const int in_dim = data.state_dim + data.action_dim;
    const int target_dim = data.state_dim + 1;
    for (int member = 0; member < cfg.members; ++member) {
        Rng rng(derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(member)));
        GaussianNet net(in_dim, target_dim, cfg, rng);
        nn::Adam opt(net.mlp(), cfg.lr);

        std::vector<Eigen::Index> order(n_train);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::vector<nn::LayerGrads> grads;
        nn::Mlp::Cache cache;
        MatrixXd Xb, Tb;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (std::size_t i = n_train; i > 1; --i)
                std::swap(order[i - 1], order[rng.below(static_cast<int>(i))]);
            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t start = 0; start < n_train;
                 start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t stop =
                    std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
                const Eigen::Index bs = static_cast<Eigen::Index>(stop - start);
                Xb.resize(bs, Xn_train.cols());
                Tb.resize(bs, Tn_train.cols());
                for (Eigen::Index i = 0; i < bs; ++i) {
                    Xb.row(i) = Xn_train.row(order[start + i]);
                    Tb.row(i) = Tn_train.row(order[start + i]);
                }
                const double loss = net.nll_and_grads(Xb, Tb, grads, cache);
                ensure(std::isfinite(loss),
                       "fit_ensemble: non-finite NLL (member " + std::to_string(member) +
                           ", epoch " + std::to_string(epoch) + ", batch at " +
                           std::to_string(start) + ")");
                opt.update(net.mlp(), grads);
                epoch_loss += loss * static_cast<double>(bs);
                seen += bs;
            }
            if (diag) diag->train_nll[member].push_back(epoch_loss / static_cast<double>(seen));
        }
        ens.members_.push_back(std::move(net));
    }

    numvec holdout_nll(cfg.members);
    for (int member = 0; member < cfg.members; ++member)
        holdout_nll[member] = ens.members_[member].nll(Xn_hold, Tn_hold);
    std::vector<int> idx(cfg.members);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return holdout_nll[a] < holdout_nll[b]; });
    ens.elites_.assign(idx.begin(), idx.begin() + cfg.elites);
    std::sort(ens.elites_.begin(), ens.elites_.end());

    if (diag) {
        diag->holdout_nll = holdout_nll;
        diag->elites = ens.elites_;
    }
    ens.trained_ = true;
    return ens;
}

/**
 * Bypasses training: constant-output members with means drawn from
 * N(mu0, sigma_e^2) and fixed output std sigma_a on the single state
 * dimension (reward head is deterministic zero). The mixture realizes a
 * Gaussian with mean ~mu0 and variance ~sigma_a^2 + sigma_e^2 as the member
 * count grows.
 */
inline GaussianEnsemble build_synthetic_ensemble(const SyntheticGaussianSpec& spec, Rng& rng) {
    require(spec.n_members >= 1, "build_synthetic_ensemble: need >= 1 member");
    require(spec.sigma_a >= 0.0 && spec.sigma_e >= 0.0,
            "build_synthetic_ensemble: sigmas must be >= 0");

    GaussianEnsemble ens;
    ens.state_dim_ = 1;
    ens.action_dim_ = 1;
    ens.config_ = ModelConfig{};
    ens.config_.members = spec.n_members;
    ens.config_.elites = spec.n_members;
    ens.input_norm_ = Normalizer::identity(2);
    ens.target_norm_ = Normalizer::identity(2);

    // Disabled clamp bounds and a hugely negative raw value give an exact
    // zero std through exp underflow.
    constexpr double off = 1e300;
    constexpr double neg = -1e12;
    ModelConfig net_cfg;
    net_cfg.hidden_layers = 1;
    net_cfg.hidden_width = 1;
    net_cfg.logvar_min = -off;
    net_cfg.logvar_max = off;
    for (int i = 0; i < spec.n_members; ++i) {
        const double mu_i = rng.normal(spec.mu0, spec.sigma_e);
        GaussianNet net(2, 2, net_cfg, rng);
        for (auto& layer : net.mlp().layers()) {
            layer.W.setZero();
            layer.b.setZero();
        }
        auto& head = net.mlp().layers().back();
        head.b(0) = mu_i;                                                      // mean of s'
        head.b(1) = 0.0;                                                       // mean of r
        head.b(2) = spec.sigma_a > 0.0 ? std::log(spec.sigma_a * spec.sigma_a) : neg;
        head.b(3) = neg;
        ens.members_.push_back(std::move(net));
        ens.elites_.push_back(i);
    }
    ens.trained_ = true;
    return ens;
}

} // namespace riskrl
