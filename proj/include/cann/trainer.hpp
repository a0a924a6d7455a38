#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cann/dataset.hpp"
#include "cann/matrix.hpp"
#include "cann/network.hpp"
#include "cann/rng.hpp"
#include "cann/stats.hpp"

namespace cann {

/// Target correlations I together with the constants derived from the train
/// split: c_{k,o} = sigma_y[o] * sigma_x[k] * I[k,o], plus the frozen feature
/// means and deviations (all with the 1/N convention, train rows only).
/// These never change during training; only the network outputs do.
struct ImportanceSpec {
    Matrix target_correlation;        // I, K x C, entries in [-1, 1]
    Matrix target_covariance;         // c, K x C
    std::vector<double> sigma_x;      // K
    std::vector<double> sigma_y;      // C
    std::vector<double> feature_mean; // xbar, K
    std::string dataset_fingerprint;
    std::size_t n_train = 0;

    std::size_t n_features() const { return target_correlation.rows(); }
    std::size_t n_outputs() const { return target_correlation.cols(); }
};

ImportanceSpec build_importance(const Dataset& ds, const Matrix& target_correlation,
                                std::span<const std::size_t> train_rows);

/// Running-mean tables over the train set for every quantity the correlation
/// gradient needs: ybar_o, mean(x_k y_o), mean(x_k h_j), mean(h_j) with j
/// ranging over the last hidden layer. One contribution slot per train
/// instance, so memory is linear in the train size for a fixed architecture.
class CannState {
public:
    CannState(std::size_t n_train, std::size_t n_features, std::size_t n_outputs,
              std::size_t last_hidden);

    /// Rebuild every table from a full forward pass with the current
    /// weights; afterwards the memoized means equal the exact ones.
    /// Used once before training and again at each epoch boundary.
    void populate(const Network& net, const Dataset& ds,
                  std::span<const std::size_t> train_rows);

    /// Replace train slot `slot`'s contributions with the activations of a
    /// fresh forward pass for that instance. O(tables) per call, O(1) per
    /// table.
    void update_instance(std::size_t slot, std::span<const double> x,
                         const ForwardTrace& trace);

    double mean_y(std::size_t o) const { return ybar_[o].mean(); }
    double mean_xy(std::size_t k, std::size_t o) const { return xy_[k * c_ + o].mean(); }
    double mean_xh(std::size_t k, std::size_t j) const { return xh_[k * h_ + j].mean(); }
    double mean_h(std::size_t j) const { return hbar_[j].mean(); }

    /// cov(y_o, X_k) = mean(x_k y_o) - xbar_k * ybar_o, with xbar from the
    /// spec (the data side never changes).
    double covariance(std::size_t k, std::size_t o, double xbar_k) const {
        return mean_xy(k, o) - xbar_k * mean_y(o);
    }
    Matrix covariances(const ImportanceSpec& spec) const;

    std::size_t n_train() const { return n_; }
    std::size_t table_entry_count() const; // total contribution slots across all tables

private:
    std::size_t n_, k_, c_, h_;
    std::vector<MeanTable> ybar_; // C tables
    std::vector<MeanTable> xy_;   // K*C tables, index k*C + o
    std::vector<MeanTable> xh_;   // K*H tables, index k*H + j
    std::vector<MeanTable> hbar_; // H tables
    std::vector<double> scratch_;
};

/// 0.5 * sum over (k, o) of (c_{k,o} - cov_{k,o})^2.
double correlation_error(const ImportanceSpec& spec, const Matrix& covariances);

/// cov(y_o, X_k) recomputed directly from the network's current outputs.
Matrix exact_covariances(const Network& net, const Dataset& ds,
                         std::span<const std::size_t> rows,
                         std::span<const double> feature_means);

/// Output-layer training signal for one instance under the blended objective
/// p * E_D + (1 - p) * E_c.
///
/// `output_deltas[o]` is the delta fed to the standard backward pass: the
/// (t - y) data term and the instance's correlation term, both scaled by the
/// logistic slope. `weight_corrections(j, o)` is the additional amount, on
/// top of that standard pass, that moves each last-hidden-to-output weight
/// onto the memoized-mean form of the correlation gradient (apply as
/// w += learning_rate * correction). Output biases take the plain delta:
/// their memoized-mean term cancels identically because a bias has a
/// constant upstream activation.
struct CannDeltas {
    std::vector<double> output_deltas; // C
    Matrix weight_corrections;         // H x C
};

CannDeltas cann_output_deltas(const ForwardTrace& trace, std::span<const double> target,
                              std::span<const double> x, const CannState& state,
                              const ImportanceSpec& spec, double p);

/// Exact full-batch gradient of E = p * E_D + (1 - p) * E_c over `rows`,
/// with covariances recomputed from the current outputs (no memoization).
/// Returns dE/d(parameter); descending means subtracting it.
Gradients composite_gradient(const Network& net, const Dataset& ds,
                             std::span<const std::size_t> rows,
                             const ImportanceSpec& spec, double p);

/// E = p * E_D + (1 - p) * E_c with exact covariances. Restricted to `rows`.
double composite_error(const Network& net, const Dataset& ds,
                       std::span<const std::size_t> rows, const ImportanceSpec& spec,
                       double p);

/// Blended-objective stochastic training, one epoch at a time. Construction
/// populates the tables from a full forward pass; run_epoch() visits the
/// train instances in a seeded shuffled order, each visit recomputing that
/// instance's activations, applying the blended step, then writing those
/// activations back into the tables; rebuild_tables() is the epoch-boundary
/// resynchronization against the current weights.
class CannTrainer {
public:
    CannTrainer(Network net, const Dataset& ds, const Split& sp, const ImportanceSpec& spec,
                const TrainConfig& cfg, double p);

    void run_epoch();
    void rebuild_tables();

    const Network& network() const { return net_; }
    const CannState& state() const { return state_; }
    EpochLog epoch_log() const; // metrics under the current weights and tables

private:
    Network net_;
    const Dataset& ds_;
    const Split& sp_;
    const ImportanceSpec& spec_;
    TrainConfig cfg_;
    double p_;
    CannState state_;
    Rng rng_;
    std::size_t epoch_ = 0;
};

/// Full training run: epochs of CannTrainer::run_epoch + rebuild_tables,
/// observer fired at each epoch boundary. With p = 1 the weight trajectory
/// is bit-identical to train_plain.
Network train_cann(Network net, const Dataset& ds, const Split& sp,
                   const ImportanceSpec& spec, const TrainConfig& cfg, double p,
                   const EpochObserver& observer = {});

} // namespace cann
