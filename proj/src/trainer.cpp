#include "cann/trainer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cann/rng.hpp"

namespace cann {

ImportanceSpec build_importance(const Dataset& ds, const Matrix& target_correlation,
                                std::span<const std::size_t> train_rows) {
    if (target_correlation.rows() != ds.n_features() ||
        target_correlation.cols() != ds.n_outputs()) {
        throw std::invalid_argument("build_importance: importance matrix shape mismatch");
    }
    for (double v : target_correlation.data()) {
        if (!(v >= -1.0 && v <= 1.0)) {
            throw std::invalid_argument("build_importance: importance values must lie in [-1, 1]");
        }
    }
    if (train_rows.empty()) throw std::invalid_argument("build_importance: empty train set");

    const std::size_t k_count = ds.n_features();
    const std::size_t c_count = ds.n_outputs();

    ImportanceSpec spec;
    spec.target_correlation = target_correlation;
    spec.dataset_fingerprint = ds.fingerprint();
    spec.n_train = train_rows.size();
    spec.sigma_x.resize(k_count);
    spec.sigma_y.resize(c_count);
    spec.feature_mean.resize(k_count);

    std::vector<double> column(train_rows.size());
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            column[i] = ds.features(train_rows[i], k);
        }
        spec.sigma_x[k] = sample_stddev(column);
        double sum = 0.0;
        for (double v : column) sum += v;
        spec.feature_mean[k] = sum / static_cast<double>(column.size());
    }
    for (std::size_t o = 0; o < c_count; ++o) {
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            column[i] = ds.targets(train_rows[i], o);
        }
        spec.sigma_y[o] = sample_stddev(column);
    }

    spec.target_covariance = Matrix(k_count, c_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t o = 0; o < c_count; ++o) {
            spec.target_covariance(k, o) =
                spec.sigma_y[o] * spec.sigma_x[k] * target_correlation(k, o);
        }
    }
    return spec;
}

CannState::CannState(std::size_t n_train, std::size_t n_features, std::size_t n_outputs,
                     std::size_t last_hidden)
    : n_(n_train), k_(n_features), c_(n_outputs), h_(last_hidden) {
    if (n_ == 0) throw std::invalid_argument("CannState: empty train set");
    const std::vector<double> zeros(n_, 0.0);
    ybar_.assign(c_, MeanTable(zeros));
    xy_.assign(k_ * c_, MeanTable(zeros));
    xh_.assign(k_ * h_, MeanTable(zeros));
    hbar_.assign(h_, MeanTable(zeros));
    scratch_.resize(n_);
}

void CannState::populate(const Network& net, const Dataset& ds,
                         std::span<const std::size_t> train_rows) {
    if (train_rows.size() != n_) {
        throw std::invalid_argument("CannState::populate: train size mismatch");
    }
    // Activations for the whole train set under the current weights.
    Matrix outputs(n_, c_);
    Matrix hiddens(n_, h_);
    for (std::size_t i = 0; i < n_; ++i) {
        const ForwardTrace trace = forward(net, ds.features.row(train_rows[i]));
        for (std::size_t o = 0; o < c_; ++o) outputs(i, o) = trace.output()[o];
        for (std::size_t j = 0; j < h_; ++j) hiddens(i, j) = trace.last_hidden()[j];
    }

    for (std::size_t o = 0; o < c_; ++o) {
        for (std::size_t i = 0; i < n_; ++i) scratch_[i] = outputs(i, o);
        ybar_[o].reset(scratch_);
    }
    for (std::size_t j = 0; j < h_; ++j) {
        for (std::size_t i = 0; i < n_; ++i) scratch_[i] = hiddens(i, j);
        hbar_[j].reset(scratch_);
    }
    for (std::size_t k = 0; k < k_; ++k) {
        for (std::size_t o = 0; o < c_; ++o) {
            for (std::size_t i = 0; i < n_; ++i) {
                scratch_[i] = ds.features(train_rows[i], k) * outputs(i, o);
            }
            xy_[k * c_ + o].reset(scratch_);
        }
        for (std::size_t j = 0; j < h_; ++j) {
            for (std::size_t i = 0; i < n_; ++i) {
                scratch_[i] = ds.features(train_rows[i], k) * hiddens(i, j);
            }
            xh_[k * h_ + j].reset(scratch_);
        }
    }
}

void CannState::update_instance(std::size_t slot, std::span<const double> x,
                                const ForwardTrace& trace) {
    if (slot >= n_) throw std::out_of_range("CannState::update_instance: bad slot");
    const auto& y = trace.output();
    const auto& h = trace.last_hidden();
    for (std::size_t o = 0; o < c_; ++o) ybar_[o].update(slot, y[o]);
    for (std::size_t j = 0; j < h_; ++j) hbar_[j].update(slot, h[j]);
    for (std::size_t k = 0; k < k_; ++k) {
        const double xk = x[k];
        for (std::size_t o = 0; o < c_; ++o) xy_[k * c_ + o].update(slot, xk * y[o]);
        for (std::size_t j = 0; j < h_; ++j) xh_[k * h_ + j].update(slot, xk * h[j]);
    }
}

Matrix CannState::covariances(const ImportanceSpec& spec) const {
    Matrix cov(k_, c_);
    for (std::size_t k = 0; k < k_; ++k) {
        for (std::size_t o = 0; o < c_; ++o) {
            cov(k, o) = covariance(k, o, spec.feature_mean[k]);
        }
    }
    return cov;
}

std::size_t CannState::table_entry_count() const {
    return n_ * (ybar_.size() + xy_.size() + xh_.size() + hbar_.size());
}

double correlation_error(const ImportanceSpec& spec, const Matrix& covariances) {
    if (covariances.rows() != spec.n_features() || covariances.cols() != spec.n_outputs()) {
        throw std::invalid_argument("correlation_error: covariance shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < covariances.data().size(); ++i) {
        const double d = spec.target_covariance.data()[i] - covariances.data()[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

Matrix exact_covariances(const Network& net, const Dataset& ds,
                         std::span<const std::size_t> rows,
                         std::span<const double> feature_means) {
    const std::size_t k_count = ds.n_features();
    const std::size_t c_count = ds.n_outputs();
    const auto n = static_cast<double>(rows.size());

    Matrix sum_xy(k_count, c_count);
    std::vector<double> sum_y(c_count, 0.0);
    for (std::size_t r : rows) {
        const ForwardTrace trace = forward(net, ds.features.row(r));
        const auto& y = trace.output();
        for (std::size_t o = 0; o < c_count; ++o) {
            sum_y[o] += y[o];
            for (std::size_t k = 0; k < k_count; ++k) {
                sum_xy(k, o) += ds.features(r, k) * y[o];
            }
        }
    }
    Matrix cov(k_count, c_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t o = 0; o < c_count; ++o) {
            cov(k, o) = sum_xy(k, o) / n - feature_means[k] * (sum_y[o] / n);
        }
    }
    return cov;
}

CannDeltas cann_output_deltas(const ForwardTrace& trace, std::span<const double> target,
                              std::span<const double> x, const CannState& state,
                              const ImportanceSpec& spec, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
    const std::size_t k_count = spec.n_features();
    const std::size_t c_count = spec.n_outputs();
    const auto& y = trace.output();
    const auto& h = trace.last_hidden();
    const std::size_t h_count = h.size();

    CannDeltas out;
    out.output_deltas.resize(c_count);
    out.weight_corrections = Matrix(h_count, c_count);

    const double q = 1.0 - p;
    std::vector<double> gaps(k_count);
    for (std::size_t o = 0; o < c_count; ++o) {
        const double slope = logistic_slope(y[o]);

        // (c - cov) gaps for this output and the instance-sampled
        // correlation pull they exert on it.
        double pull = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            gaps[k] = spec.target_covariance(k, o) -
                      state.covariance(k, o, spec.feature_mean[k]);
            pull += gaps[k] * (x[k] - spec.feature_mean[k]);
        }
        out.output_deltas[o] = slope * (p * (target[o] - y[o]) + q * pull);

        // Memoized-mean form for the last-hidden weights: replace the
        // instance-sampled pull * h_j that the standard pass applies with
        // sum_k gap * (mean(x_k h_j) - xbar_k mean(h_j)).
        for (std::size_t j = 0; j < h_count; ++j) {
            const double hbar = state.mean_h(j);
            double table_term = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                table_term += gaps[k] * (state.mean_xh(k, j) -
                                         spec.feature_mean[k] * hbar);
            }
            out.weight_corrections(j, o) = slope * q * (table_term - pull * h[j]);
        }
    }
    return out;
}

double composite_error(const Network& net, const Dataset& ds,
                       std::span<const std::size_t> rows, const ImportanceSpec& spec,
                       double p) {
    const Matrix cov = exact_covariances(net, ds, rows, spec.feature_mean);
    return p * data_error(net, ds, rows) + (1.0 - p) * correlation_error(spec, cov);
}

Gradients composite_gradient(const Network& net, const Dataset& ds,
                             std::span<const std::size_t> rows,
                             const ImportanceSpec& spec, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
    const std::size_t k_count = spec.n_features();
    const std::size_t c_count = spec.n_outputs();
    const auto n = static_cast<double>(rows.size());

    const Matrix cov = exact_covariances(net, ds, rows, spec.feature_mean);
    Matrix gap(k_count, c_count);
    for (std::size_t i = 0; i < gap.data().size(); ++i) {
        gap.data()[i] = spec.target_covariance.data()[i] - cov.data()[i];
    }

    // Accumulated descent directions; dE/dtheta is their negation.
    Gradients total = zero_gradients(net);
    std::vector<double> deltas(c_count);
    for (std::size_t r : rows) {
        const std::span<const double> x = ds.features.row(r);
        const ForwardTrace trace = forward(net, x);
        const auto& y = trace.output();
        for (std::size_t o = 0; o < c_count; ++o) {
            double pull = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                pull += gap(k, o) * (x[k] - spec.feature_mean[k]);
            }
            deltas[o] = logistic_slope(y[o]) *
                        (p * (ds.targets(r, o) - y[o]) + (1.0 - p) * pull / n);
        }
        total.accumulate(backprop_gradients(net, trace, deltas));
    }

    Gradients grad = zero_gradients(net);
    grad.accumulate(total, -1.0);
    return grad;
}

CannTrainer::CannTrainer(Network net, const Dataset& ds, const Split& sp,
                         const ImportanceSpec& spec, const TrainConfig& cfg, double p)
    : net_(std::move(net)),
      ds_(ds),
      sp_(sp),
      spec_(spec),
      cfg_(cfg),
      p_(p),
      state_(sp.train_indices.size(), ds.n_features(), ds.n_outputs(),
             net_.last_hidden_size()),
      rng_(cfg.seed) {
    cfg_.validate();
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
    if (sp.train_indices.empty()) throw std::invalid_argument("empty train set");
    if (spec.dataset_fingerprint != ds.fingerprint()) {
        throw std::invalid_argument("importance spec was built for a different dataset");
    }
    if (spec.n_train != sp.train_indices.size()) {
        throw std::invalid_argument("importance spec was built for a different split");
    }
    if (spec.n_features() != ds.n_features() || spec.n_outputs() != ds.n_outputs()) {
        throw std::invalid_argument("importance spec shape mismatch");
    }
    state_.populate(net_, ds_, sp_.train_indices);
}

void CannTrainer::run_epoch() {
    std::vector<std::size_t> order(sp_.train_indices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_in_place(order, rng_);

    const std::size_t out_layer = net_.n_layers() - 2; // index into weights[]
    for (std::size_t slot : order) {
        const std::size_t row = sp_.train_indices[slot];
        const std::span<const double> x = ds_.features.row(row);
        const ForwardTrace trace = forward(net_, x);
        const CannDeltas d =
            cann_output_deltas(trace, ds_.targets.row(row), x, state_, spec_, p_);
        backprop_step(net_, trace, d.output_deltas, cfg_.learning_rate);
        Matrix& w_out = net_.weights[out_layer];
        for (std::size_t j = 0; j < w_out.rows(); ++j) {
            for (std::size_t o = 0; o < w_out.cols(); ++o) {
                w_out(j, o) += cfg_.learning_rate * d.weight_corrections(j, o);
            }
        }
        state_.update_instance(slot, x, trace);
    }
    ++epoch_;
}

void CannTrainer::rebuild_tables() {
    state_.populate(net_, ds_, sp_.train_indices);
}

EpochLog CannTrainer::epoch_log() const {
    EpochLog log;
    log.epoch = epoch_;
    log.data_err = data_error(net_, ds_, sp_.train_indices);
    log.corr_err = correlation_error(spec_, state_.covariances(spec_));
    log.blended_err = p_ * log.data_err + (1.0 - p_) * *log.corr_err;
    log.train_accuracy = accuracy_percent(net_, ds_, sp_.train_indices);
    return log;
}

Network train_cann(Network net, const Dataset& ds, const Split& sp,
                   const ImportanceSpec& spec, const TrainConfig& cfg, double p,
                   const EpochObserver& observer) {
    CannTrainer trainer(std::move(net), ds, sp, spec, cfg, p);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        trainer.run_epoch();
        trainer.rebuild_tables();
        if (observer) observer(trainer.epoch_log(), trainer.network());
    }
    return trainer.network();
}

} // namespace cann
