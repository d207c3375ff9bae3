#include <doctest.h>

#include "pbp/errors.hpp"
#include "pbp/features.hpp"
#include "pbp/model.hpp"
#include "pbp/tensor.hpp"
#include "testutil.hpp"

using namespace pbp;
using testutil::var;

TEST_CASE("indicator is one-hot with 0-based states") {
    CHECK(indicator(3, 6) == std::vector<double>{0, 0, 0, 1, 0, 0});
    CHECK(indicator(0, 2) == std::vector<double>{1, 0});
    double total = 0.0;
    for (double v : indicator(4, 7)) total += v;
    CHECK(total == 1.0);
    CHECK_THROWS_AS(indicator(6, 6), validation_error);
    CHECK_THROWS_AS(indicator(-1, 6), validation_error);
}

TEST_CASE("sufficient statistics over two binary variables index row-major") {
    const FeatureMap fm({10, 20}, {2, 2});
    const std::vector<int> assign = {1, 0};
    CHECK(sufficient_stats(fm, assign) == std::vector<double>{0, 0, 1, 0});
    const std::vector<int> bad = {1};
    CHECK_THROWS_AS(sufficient_stats(fm, bad), validation_error);
}

TEST_CASE("singleton maps reduce to the plain indicator") {
    const FeatureMap fm({5}, {4});
    const std::vector<int> assign = {2};
    CHECK(sufficient_stats(fm, assign) == indicator(2, 4));
}

TEST_CASE("feature vectors match the vectorized outer product of indicators") {
    const FeatureMap fm({1, 2, 3}, {2, 3, 2});
    std::vector<int> assign = {1, 2, 0};
    const auto direct = sufficient_stats(fm, assign);
    NamedTensor prod = NamedTensor::one_hot(ModeLabel::variable(1), 2, 1);
    prod = outer_product(prod, NamedTensor::one_hot(ModeLabel::variable(2), 3, 2));
    prod = outer_product(prod, NamedTensor::one_hot(ModeLabel::variable(3), 2, 0));
    const std::vector<ModeLabel> order = {ModeLabel::variable(1), ModeLabel::variable(2), ModeLabel::variable(3)};
    const auto vec = vectorize(prod, order);
    CHECK(testutil::max_abs_diff(vec.data(), direct) == 0.0);
}

TEST_CASE("index maps are bijective") {
    const FeatureMap fm({0, 1, 2}, {3, 2, 4});
    for (std::int64_t i = 0; i < fm.dim(); ++i) {
        const auto assign = fm.assignment_of(i);
        CHECK(fm.index_of(assign) == i);
    }
}

TEST_CASE("expected sufficient statistics equal the joint marginal") {
    // The defining sufficiency property: E[theta] devectorizes to P[alpha].
    const auto model = random_model(testutil::chain3_structure(), 13);
    const auto joint = brute_force_joint(model);
    const FeatureMap fm({3, 4}, {2, 2});  // alpha = {X1, X2}
    std::vector<double> expectation(static_cast<std::size_t>(fm.dim()), 0.0);
    std::vector<int> assign(6, 0);
    for (std::int64_t f = 0; f < joint.size(); ++f) {
        const std::vector<int> a = {assign[3], assign[4]};
        expectation[static_cast<std::size_t>(fm.index_of(a))] += joint[f];
        for (int i = 5; i >= 0; --i) {
            if (++assign[static_cast<std::size_t>(i)] < 2) break;
            assign[static_cast<std::size_t>(i)] = 0;
        }
    }
    // Marginal via the tensor route.
    const std::vector<ModeLabel> drop = {ModeLabel::variable(0), ModeLabel::variable(1),
                                         ModeLabel::variable(2), ModeLabel::variable(5)};
    const auto marginal = marginalize(joint, drop);
    CHECK(testutil::max_abs_diff(marginal.data(), expectation) < 1e-12);
}

TEST_CASE("evidence features default to the constant vector on an empty set") {
    const FeatureMap empty;
    CHECK(empty.dim() == 1);
    const std::vector<int> none = {};
    CHECK(evidence_features(empty, none) == std::vector<double>{1.0});

    const FeatureMap fm({7}, {2});
    const std::vector<int> one = {1};
    CHECK(evidence_features(fm, one) == std::vector<double>{0, 1});
    const FeatureMap fm2({7, 8, 9}, {2, 3, 2});
    CHECK(fm2.dim() == 12);
}

TEST_CASE("zeta is all-ones when unobserved, one-hot when observed") {
    CHECK(zeta(3, std::nullopt) == std::vector<double>{1, 1, 1});
    CHECK(zeta(4, 2) == std::vector<double>{0, 0, 1, 0});
    for (double v : zeta(5, 3)) CHECK((v == 0.0 || v == 1.0));
    for (double v : zeta(5, std::nullopt)) CHECK((v == 0.0 || v == 1.0));
}
