#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cann/rng.hpp"
#include "cann/stats.hpp"
#include "cann/trainer.hpp"
#include "test_util.hpp"

using namespace cann;

namespace {

// Correlation error evaluated from scratch: forward passes, plain-loop means,
// no tables involved.
double oracle_correlation_error(const Network& net, const Dataset& ds,
                                const std::vector<std::size_t>& rows,
                                const ImportanceSpec& spec) {
    const auto n = static_cast<double>(rows.size());
    double total = 0.0;
    for (std::size_t k = 0; k < ds.n_features(); ++k) {
        for (std::size_t o = 0; o < ds.n_outputs(); ++o) {
            double sum_xy = 0.0, sum_x = 0.0, sum_y = 0.0;
            for (std::size_t r : rows) {
                const double y = forward(net, ds.features.row(r)).output()[o];
                sum_xy += ds.features(r, k) * y;
                sum_x += ds.features(r, k);
                sum_y += y;
            }
            const double cov = sum_xy / n - (sum_x / n) * (sum_y / n);
            const double gap = spec.target_covariance(k, o) - cov;
            total += gap * gap;
        }
    }
    return 0.5 * total;
}

} // namespace

TEST_CASE("build_importance derives the target covariances from the train rows") {
    // 10 instances: binary feature with 5 ones (sigma 0.5), binary class with
    // 2 positives (sigma 0.4)
    Matrix features(10, 1);
    std::vector<std::size_t> classes(10, 0);
    for (std::size_t i = 0; i < 5; ++i) features(i, 0) = 1.0;
    classes[0] = classes[7] = 1;
    const Dataset ds = testutil::dataset_from(features, testutil::one_hot(classes, 2));

    Matrix importance(1, 2);
    importance(0, 1) = 0.8;
    const auto rows = testutil::all_rows(10);
    const ImportanceSpec spec = build_importance(ds, importance, rows);

    CHECK(spec.sigma_x[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(spec.sigma_y[1] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(spec.target_covariance(0, 1) == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(spec.target_covariance(0, 0) == 0.0); // I = 0 there
    CHECK(spec.feature_mean[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(spec.n_train == 10);
    CHECK(spec.dataset_fingerprint == ds.fingerprint());
}

TEST_CASE("build_importance zero cases and validation") {
    Rng rng(41);
    const Dataset ds = testutil::random_dataset(8, 3, 2, rng);
    const auto rows = testutil::all_rows(8);

    const ImportanceSpec zero = build_importance(ds, Matrix(3, 2), rows);
    for (double c : zero.target_covariance.data()) CHECK(c == 0.0);

    // constant feature: its covariance row stays zero regardless of I
    Matrix features = ds.features;
    for (std::size_t r = 0; r < 8; ++r) features(r, 1) = 0.4;
    const Dataset with_const = testutil::dataset_from(features, ds.targets);
    Matrix importance(3, 2);
    for (double& v : importance.data()) v = 0.9;
    const ImportanceSpec spec = build_importance(with_const, importance, rows);
    CHECK(spec.sigma_x[1] == 0.0);
    CHECK(spec.target_covariance(1, 0) == 0.0);
    CHECK(spec.target_covariance(1, 1) == 0.0);

    Matrix bad(3, 2);
    bad(0, 0) = 1.5;
    CHECK_THROWS_AS(build_importance(ds, bad, rows), std::invalid_argument);
    CHECK_THROWS_AS(build_importance(ds, Matrix(2, 2), rows), std::invalid_argument);
}

TEST_CASE("correlation_error is half the squared gap") {
    ImportanceSpec spec;
    spec.target_correlation = Matrix(1, 1);
    spec.target_covariance = Matrix(1, 1);
    spec.target_covariance(0, 0) = 0.2;

    Matrix cov(1, 1);
    cov(0, 0) = 0.2;
    CHECK(correlation_error(spec, cov) == 0.0);

    cov(0, 0) = 0.0;
    CHECK(correlation_error(spec, cov) == doctest::Approx(0.02).epsilon(1e-14));
}

TEST_CASE("state covariances match the from-scratch evaluation") {
    Rng rng(43);
    for (int rep = 0; rep < 5; ++rep) {
        const Dataset ds = testutil::random_dataset(12, 3, 2, rng);
        const auto rows = testutil::all_rows(12);
        Matrix importance(3, 2);
        for (double& v : importance.data()) v = uniform_in(rng, -0.9, 0.9);
        const ImportanceSpec spec = build_importance(ds, importance, rows);

        const Network net = init_network(std::vector<std::size_t>{3, 4, 2}, 50 + rep, 0.7);
        CannState state(12, 3, 2, 4);
        state.populate(net, ds, rows);

        const double from_tables = correlation_error(spec, state.covariances(spec));
        const double from_scratch = oracle_correlation_error(net, ds, rows, spec);
        CHECK(from_tables == doctest::Approx(from_scratch).epsilon(1e-9));
    }
}

TEST_CASE("output deltas collapse to plain backprop at p = 1") {
    Rng rng(47);
    const Dataset ds = testutil::random_dataset(10, 3, 2, rng);
    const auto rows = testutil::all_rows(10);
    Matrix importance(3, 2);
    for (double& v : importance.data()) v = uniform_in(rng, -0.5, 0.5);
    const ImportanceSpec spec = build_importance(ds, importance, rows);

    const Network net = init_network(std::vector<std::size_t>{3, 4, 2}, 61, 0.6);
    CannState state(10, 3, 2, 4);
    state.populate(net, ds, rows);

    const ForwardTrace trace = forward(net, ds.features.row(2));
    const CannDeltas d =
        cann_output_deltas(trace, ds.targets.row(2), ds.features.row(2), state, spec, 1.0);

    for (std::size_t o = 0; o < 2; ++o) {
        const double y = trace.output()[o];
        const double plain = logistic_slope(y) * (ds.targets(2, o) - y);
        CHECK(testutil::bitwise_equal(d.output_deltas[o], plain));
    }
    for (double c : d.weight_corrections.data()) CHECK(c == 0.0);

    CHECK_THROWS_AS(cann_output_deltas(trace, ds.targets.row(2), ds.features.row(2), state,
                                       spec, 1.5),
                    std::invalid_argument);
}

TEST_CASE("gradient vanishes at p = 0 when the covariances already match") {
    Rng rng(53);
    const Dataset ds = testutil::random_dataset(9, 2, 2, rng);
    const auto rows = testutil::all_rows(9);
    const Network net = init_network(std::vector<std::size_t>{2, 3, 2}, 17, 0.5);

    // target correlations = the ones the current network actually attains
    const Matrix cov = exact_covariances(
        net, ds, rows, build_importance(ds, Matrix(2, 2), rows).feature_mean);
    ImportanceSpec spec = build_importance(ds, Matrix(2, 2), rows);
    spec.target_covariance = cov;

    CannState state(9, 2, 2, 3);
    state.populate(net, ds, rows);

    for (std::size_t r : rows) {
        const ForwardTrace trace = forward(net, ds.features.row(r));
        const CannDeltas d = cann_output_deltas(trace, ds.targets.row(r),
                                                ds.features.row(r), state, spec, 0.0);
        for (double v : d.output_deltas) CHECK(std::fabs(v) <= 1e-9);
        for (double v : d.weight_corrections.data()) CHECK(std::fabs(v) <= 1e-9);
    }

    const Gradients g = composite_gradient(net, ds, rows, spec, 0.0);
    for (const auto& w : g.weights) {
        for (double v : w.data()) CHECK(std::fabs(v) <= 1e-9);
    }
}

TEST_CASE("composite gradient matches central finite differences") {
    Rng rng(59);
    const double eps = 1e-6;
    const double p_values[4] = {0.0, 0.3, 0.7, 1.0};
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t n = 5 + uniform_index(rng, 5);
        const std::size_t k = 2 + uniform_index(rng, 2);
        const std::size_t h = 2 + uniform_index(rng, 3);
        const std::size_t c = 1 + uniform_index(rng, 2);
        const Dataset ds = testutil::random_dataset(n, k, c == 1 ? 2 : c, rng);
        const auto rows = testutil::all_rows(n);

        Matrix importance(ds.n_features(), ds.n_outputs());
        for (double& v : importance.data()) v = uniform_in(rng, -0.8, 0.8);
        const ImportanceSpec spec = build_importance(ds, importance, rows);

        const Network net = init_network(
            std::vector<std::size_t>{ds.n_features(), h, ds.n_outputs()}, 300 + rep, 0.8);
        const double p = p_values[uniform_index(rng, 4)];

        const Gradients grad = composite_gradient(net, ds, rows, spec, p);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].data().size(); ++i) {
                Network plus = net, minus = net;
                plus.weights[l].data()[i] += eps;
                minus.weights[l].data()[i] -= eps;
                const double fd = (composite_error(plus, ds, rows, spec, p) -
                                   composite_error(minus, ds, rows, spec, p)) /
                                  (2 * eps);
                CHECK(testutil::rel_diff(grad.weights[l].data()[i], fd) <= 1e-5);
            }
            for (std::size_t j = 0; j < net.biases[l].size(); ++j) {
                Network plus = net, minus = net;
                plus.biases[l][j] += eps;
                minus.biases[l][j] -= eps;
                const double fd = (composite_error(plus, ds, rows, spec, p) -
                                   composite_error(minus, ds, rows, spec, p)) /
                                  (2 * eps);
                CHECK(testutil::rel_diff(grad.biases[l][j], fd) <= 1e-5);
            }
        }
    }
}

TEST_CASE("train_cann with p = 1 walks the exact train_plain trajectory") {
    Rng rng(61);
    const Dataset ds = testutil::random_dataset(14, 3, 2, rng);
    const Split sp = split(ds, 0.5, 9);
    Matrix importance(3, 2);
    for (double& v : importance.data()) v = uniform_in(rng, -0.7, 0.7);
    const ImportanceSpec spec = build_importance(ds, importance, sp.train_indices);

    TrainConfig cfg;
    cfg.learning_rate = 0.4;
    cfg.epochs = 8;
    cfg.seed = 9;

    std::vector<Network> plain_epochs, cann_epochs;
    const Network net0 = init_network(std::vector<std::size_t>{3, 4, 2}, 9, 0.5);
    train_plain(net0, ds, sp, cfg,
                [&](const EpochLog&, const Network& n) { plain_epochs.push_back(n); });
    train_cann(net0, ds, sp, spec, cfg, 1.0,
               [&](const EpochLog&, const Network& n) { cann_epochs.push_back(n); });

    REQUIRE(plain_epochs.size() == cfg.epochs);
    REQUIRE(cann_epochs.size() == cfg.epochs);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        CHECK(testutil::bitwise_equal(plain_epochs[e], cann_epochs[e]));
    }
}

TEST_CASE("train_cann validates the spec against dataset and split") {
    Rng rng(67);
    const Dataset ds = testutil::random_dataset(10, 2, 2, rng);
    const Dataset other = testutil::random_dataset(10, 2, 2, rng);
    const Split sp = split(ds, 0.5, 2);
    const ImportanceSpec spec = build_importance(other, Matrix(2, 2), sp.train_indices);

    TrainConfig cfg;
    cfg.epochs = 1;
    const Network net0 = init_network(std::vector<std::size_t>{2, 3, 2}, 2, 0.5);
    CHECK_THROWS_AS(train_cann(net0, ds, sp, spec, cfg, 0.5), std::invalid_argument);

    const ImportanceSpec wrong_split =
        build_importance(ds, Matrix(2, 2), std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(train_cann(net0, ds, sp, wrong_split, cfg, 0.5), std::invalid_argument);
}

TEST_CASE("memoized covariances stay in step with the network across epochs") {
    Rng rng(71);
    const Dataset ds = testutil::random_dataset(30, 3, 2, rng);
    const Split sp = split(ds, 0.5, 5);
    Matrix importance(3, 2);
    for (double& v : importance.data()) v = uniform_in(rng, -0.6, 0.6);
    const ImportanceSpec spec = build_importance(ds, importance, sp.train_indices);

    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.epochs = 6;
    cfg.seed = 5;

    const Network net0 = init_network(std::vector<std::size_t>{3, 4, 2}, 5, 0.5);
    std::size_t checked = 0;
    train_cann(net0, ds, sp, spec, cfg, 0.5,
               [&](const EpochLog&, const Network& n) {
                   // epoch boundary: tables were just rebuilt from n
                   CannState fresh(sp.train_indices.size(), 3, 2, 4);
                   fresh.populate(n, ds, sp.train_indices);
                   const Matrix direct =
                       exact_covariances(n, ds, sp.train_indices, spec.feature_mean);
                   const Matrix memoized = fresh.covariances(spec);
                   for (std::size_t i = 0; i < direct.data().size(); ++i) {
                       CHECK(std::fabs(memoized.data()[i] - direct.data()[i]) <= 1e-6);
                   }
                   ++checked;
               });
    CHECK(checked == cfg.epochs);
}

TEST_CASE("correlation error is invariant to the train-order permutation") {
    Rng rng(73);
    const Dataset ds = testutil::random_dataset(16, 3, 2, rng);
    auto rows = testutil::all_rows(16);
    Matrix importance(3, 2);
    for (double& v : importance.data()) v = uniform_in(rng, -0.5, 0.5);
    const ImportanceSpec spec = build_importance(ds, importance, rows);
    const Network net = init_network(std::vector<std::size_t>{3, 4, 2}, 8, 0.5);

    CannState state(16, 3, 2, 4);
    state.populate(net, ds, rows);
    const double reference = correlation_error(spec, state.covariances(spec));

    for (int rep = 0; rep < 3; ++rep) {
        auto shuffled = rows;
        shuffle_in_place(shuffled, rng);
        const ImportanceSpec spec2 = build_importance(ds, importance, shuffled);
        CannState state2(16, 3, 2, 4);
        state2.populate(net, ds, shuffled);
        CHECK(correlation_error(spec2, state2.covariances(spec2)) ==
              doctest::Approx(reference).epsilon(1e-12));
    }
}

TEST_CASE("table storage grows linearly with the train size") {
    const std::size_t k = 5, c = 3, h = 4;
    for (std::size_t n : {10UL, 20UL, 40UL}) {
        CannState state(n, k, c, h);
        CHECK(state.table_entry_count() == n * (k * c + k * h + h + c));
    }
}

TEST_CASE("training with p = 0 descends the correlation error") {
    // feature 0 carries the class; the correlation targets are attainable
    Rng rng(79);
    const std::size_t n = 20;
    Matrix features(n, 3);
    std::vector<std::size_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        classes[i] = i % 2;
        features(i, 0) = static_cast<double>(classes[i]);
        features(i, 1) = uniform_unit(rng);
        features(i, 2) = uniform_unit(rng);
    }
    const Dataset ds = testutil::dataset_from(features, testutil::one_hot(classes, 2));
    const auto rows = testutil::all_rows(n);
    const Matrix importance = compute_importance(ds).correlation;
    const ImportanceSpec spec = build_importance(ds, importance, rows);

    Split sp;
    sp.train_indices = rows;
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 40;
    cfg.seed = 12;

    const Network net0 = init_network(std::vector<std::size_t>{3, 4, 2}, 12, 0.5);
    const double initial = correlation_error(
        spec, exact_covariances(net0, ds, rows, spec.feature_mean));

    double final_err = 0.0;
    train_cann(net0, ds, sp, spec, cfg, 0.0,
               [&](const EpochLog& log, const Network&) { final_err = *log.corr_err; });
    CHECK(final_err < initial);
}

TEST_CASE("correlation knowledge helps on a small informative dataset") {
    // feature 0 equals the class, features 1..3 are noise; 30 train
    // instances, 20 paired seeds
    Rng rng(83);
    const std::size_t n = 60;
    Matrix features(n, 4);
    std::vector<std::size_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        classes[i] = i % 2;
        features(i, 0) = static_cast<double>(classes[i]);
        for (std::size_t k = 1; k < 4; ++k) features(i, k) = uniform_unit(rng);
    }
    const Dataset ds = testutil::dataset_from(features, testutil::one_hot(classes, 2));
    const Matrix importance = compute_importance(ds).correlation;

    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 30;
    cfg.hidden_sizes = {4};

    double plain_sum = 0.0, cann_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Split sp = split(ds, 0.5, seed); // 30 train instances
        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = seed;
        const Network net0 = init_network(std::vector<std::size_t>{4, 4, 2}, seed, 0.5);

        const Network plain = train_plain(net0, ds, sp, trial_cfg);
        plain_sum += accuracy_percent(plain, ds, sp.test_indices);

        const ImportanceSpec spec = build_importance(ds, importance, sp.train_indices);
        const Network aided = train_cann(net0, ds, sp, spec, trial_cfg, 0.5);
        cann_sum += accuracy_percent(aided, ds, sp.test_indices);
    }
    CHECK(cann_sum / 20.0 >= plain_sum / 20.0);
}
