#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "riskrl/common.hpp"

namespace riskrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One (s, a, r, s', done) tuple.
struct TransitionRecord {
    VectorXd state;
    VectorXd action;
    double reward = 0.0;
    VectorXd next_state;
    bool terminal = false;
};

/// Per-dimension affine standardization. Dimensions with std below 1e-8
/// pass through unscaled.
struct Normalizer {
    VectorXd mean;
    VectorXd scale;

    static Normalizer fit(const MatrixXd& rows) {
        require(rows.rows() >= 1, "Normalizer::fit: no rows");
        Normalizer n;
        n.mean = rows.colwise().mean();
        n.scale.resize(rows.cols());
        for (int j = 0; j < rows.cols(); ++j) {
            const double var =
                (rows.col(j).array() - n.mean(j)).square().sum() / rows.rows();
            const double sd = std::sqrt(var);
            n.scale(j) = sd < 1e-8 ? 1.0 : sd;
        }
        return n;
    }

    static Normalizer identity(int dims) {
        Normalizer n;
        n.mean = VectorXd::Zero(dims);
        n.scale = VectorXd::Ones(dims);
        return n;
    }

    MatrixXd apply(const MatrixXd& rows) const {
        return (rows.rowwise() - mean.transpose()).array().rowwise() /
               scale.transpose().array();
    }

    MatrixXd invert(const MatrixXd& rows) const {
        return (rows.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
               mean.transpose();
    }

    VectorXd apply_one(const VectorXd& row) const {
        return ((row - mean).array() / scale.array()).matrix();
    }

    VectorXd invert_one(const VectorXd& row) const {
        return (row.array() * scale.array()).matrix() + mean;
    }
};

/**
 * Fixed dataset of transitions plus cached column-matrix views used by model
 * and agent training. Matrices are built lazily from the record list.
 */
class OfflineDataset {
public:
    int state_dim = 0;
    int action_dim = 0;
    std::string env_id = "unknown";
    std::uint64_t seed = 0;
    std::vector<TransitionRecord> records;
    Normalizer input_stats; // set by normalize_inputs

    std::size_t size() const { return records.size(); }

    void validate() const {
        require(state_dim >= 1 && action_dim >= 1, "OfflineDataset: dims unset");
        for (const auto& rec : records) {
            require(rec.state.size() == state_dim && rec.next_state.size() == state_dim &&
                        rec.action.size() == action_dim,
                    "OfflineDataset: inconsistent record dimensions");
            require(rec.state.allFinite() && rec.action.allFinite() &&
                        rec.next_state.allFinite() && std::isfinite(rec.reward),
                    "OfflineDataset: non-finite entries");
        }
    }

    const MatrixXd& states() const { return cache("s").s; }
    const MatrixXd& actions() const { return cache("a").a; }
    const MatrixXd& next_states() const { return cache("n").next; }
    const VectorXd& rewards() const { return cache("r").r; }
    const VectorXd& terminals() const { return cache("t").done; }

    /// Network inputs concat(s, a) as rows.
    MatrixXd inputs() const {
        MatrixXd X(records.size(), state_dim + action_dim);
        X << states(), actions();
        return X;
    }

    /// Model targets concat(s', r) as rows.
    MatrixXd targets() const {
        MatrixXd T(records.size(), state_dim + 1);
        T << next_states(), rewards();
        return T;
    }

    void invalidate_cache() { built_ = false; }

    void save_text(const std::string& path) const;
    void save_binary(const std::string& path) const;
    static OfflineDataset load(const std::string& path);

private:
    struct Cache {
        MatrixXd s, a, next;
        VectorXd r, done;
    };
    mutable Cache cache_;
    mutable bool built_ = false;

    const Cache& cache(const char*) const {
        if (!built_) {
            const auto n = static_cast<Eigen::Index>(records.size());
            cache_.s.resize(n, state_dim);
            cache_.a.resize(n, action_dim);
            cache_.next.resize(n, state_dim);
            cache_.r.resize(n);
            cache_.done.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                cache_.s.row(i) = records[i].state.transpose();
                cache_.a.row(i) = records[i].action.transpose();
                cache_.next.row(i) = records[i].next_state.transpose();
                cache_.r(i) = records[i].reward;
                cache_.done(i) = records[i].terminal ? 1.0 : 0.0;
            }
            built_ = true;
        }
        return cache_;
    }
};

/// Fits dataset-wide input statistics (dimensions of concat(s, a)) and
/// stores them on the dataset. Model training fits its own statistics on
/// the training split; this is the standalone preprocessing entry point.
inline Normalizer normalize_inputs(OfflineDataset& data) {
    data.validate();
    require(!data.records.empty(), "normalize_inputs: empty dataset");
    data.input_stats = Normalizer::fit(data.inputs());
    return data.input_stats;
}

// ---------------------------------------------------------------------------
// File formats. Text: a header line
//   riskrl-dataset text <state_dim> <action_dim> <count> <env_id> <seed>
// followed by one record per line (state, action, reward, next_state,
// terminal flag) at 17 significant digits. Binary: the same header followed
// by raw little-endian doubles in the same field order.
// ---------------------------------------------------------------------------

inline void OfflineDataset::save_text(const std::string& path) const {
    validate();
    std::ofstream os(path);
    ensure(os.good(), "save_text: cannot open " + path);
    os << "riskrl-dataset text " << state_dim << ' ' << action_dim << ' ' << records.size()
       << ' ' << env_id << ' ' << seed << '\n';
    os.precision(17);
    for (const auto& rec : records) {
        for (int i = 0; i < state_dim; ++i) os << rec.state(i) << ' ';
        for (int i = 0; i < action_dim; ++i) os << rec.action(i) << ' ';
        os << rec.reward << ' ';
        for (int i = 0; i < state_dim; ++i) os << rec.next_state(i) << ' ';
        os << (rec.terminal ? 1 : 0) << '\n';
    }
    ensure(os.good(), "save_text: write failure on " + path);
}

inline void OfflineDataset::save_binary(const std::string& path) const {
    validate();
    std::ofstream os(path, std::ios::binary);
    ensure(os.good(), "save_binary: cannot open " + path);
    os << "riskrl-dataset binary " << state_dim << ' ' << action_dim << ' ' << records.size()
       << ' ' << env_id << ' ' << seed << '\n';
    std::vector<double> row(2 * state_dim + action_dim + 2);
    for (const auto& rec : records) {
        int k = 0;
        for (int i = 0; i < state_dim; ++i) row[k++] = rec.state(i);
        for (int i = 0; i < action_dim; ++i) row[k++] = rec.action(i);
        row[k++] = rec.reward;
        for (int i = 0; i < state_dim; ++i) row[k++] = rec.next_state(i);
        row[k++] = rec.terminal ? 1.0 : 0.0;
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    ensure(os.good(), "save_binary: write failure on " + path);
}

inline OfflineDataset OfflineDataset::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    ensure(is.good(), "OfflineDataset::load: cannot open " + path);
    std::string magic, mode;
    is >> magic >> mode;
    ensure(magic == "riskrl-dataset", "OfflineDataset::load: not a dataset file: " + path);
    OfflineDataset d;
    std::size_t count = 0;
    is >> d.state_dim >> d.action_dim >> count >> d.env_id >> d.seed;
    ensure(is.good() && d.state_dim >= 1 && d.action_dim >= 1,
           "OfflineDataset::load: malformed header");
    is.ignore(1, '\n');
    d.records.resize(count);
    if (mode == "text") {
        for (auto& rec : d.records) {
            rec.state.resize(d.state_dim);
            rec.action.resize(d.action_dim);
            rec.next_state.resize(d.state_dim);
            for (int i = 0; i < d.state_dim; ++i) is >> rec.state(i);
            for (int i = 0; i < d.action_dim; ++i) is >> rec.action(i);
            is >> rec.reward;
            for (int i = 0; i < d.state_dim; ++i) is >> rec.next_state(i);
            int flag = 0;
            is >> flag;
            rec.terminal = flag != 0;
        }
    } else if (mode == "binary") {
        std::vector<double> row(2 * d.state_dim + d.action_dim + 2);
        for (auto& rec : d.records) {
            is.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(row.size() * sizeof(double)));
            int k = 0;
            rec.state.resize(d.state_dim);
            rec.action.resize(d.action_dim);
            rec.next_state.resize(d.state_dim);
            for (int i = 0; i < d.state_dim; ++i) rec.state(i) = row[k++];
            for (int i = 0; i < d.action_dim; ++i) rec.action(i) = row[k++];
            rec.reward = row[k++];
            for (int i = 0; i < d.state_dim; ++i) rec.next_state(i) = row[k++];
            rec.terminal = row[k++] != 0.0;
        }
    } else {
        throw runtime_failure("OfflineDataset::load: unknown mode " + mode);
    }
    ensure(!is.fail(), "OfflineDataset::load: truncated file " + path);
    d.validate();
    return d;
}

} // namespace riskrl
