// SPDX-License-Identifier: Apache-2.0
//
// chwhisper - cooperative physical-layer group key generation over IR-UWB channels
// Copyright (C) 2026 The chwhisper authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <chwhisper/deconvolution.hpp>

#include <catch_amalgamated.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace chwhisper;
using Catch::Approx;

namespace {

VectorXd gaussian(Index n, std::mt19937_64 &rng)
{
    std::normal_distribution<double> g;
    VectorXd v(n);
    for (Index i = 0; i < n; ++i)
        v(i) = g(rng);
    return v;
}

double rel(const VectorXd &a, const VectorXd &b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

// Direct (H^T H + lambda P^T P)^{-1} H^T y through a full-pivot LU.
VectorXd map_oracle(const MatrixXd &h, const MatrixXd &p, const VectorXd &y, double lambda)
{
    const MatrixXd a = h.transpose() * h + lambda * p.transpose() * p;
    return a.fullPivLu().solve(h.transpose() * y);
}

} // namespace

TEST_CASE("valid-part convolution on a hand example", "[deconv]")
{
    VectorXd k(2);
    k << 1.0, -1.0;
    const ConvolutionOperator op(k, 3);
    CHECK(op.source_len() == 4);
    VectorXd s(4);
    s << 1.0, 2.0, 4.0, 7.0;
    const VectorXd y = op.apply(s);
    CHECK(y(0) == 1.0);
    CHECK(y(1) == 2.0);
    CHECK(y(2) == 3.0);

    MatrixXd expected(3, 4);
    expected << -1, 1, 0, 0, //
        0, -1, 1, 0,         //
        0, 0, -1, 1;
    CHECK(op.dense() == expected);
}

TEST_CASE("operator, adjoint, dense form and row Gram are consistent", "[deconv]")
{
    std::mt19937_64 rng(1);
    for (auto [n, nh] : {std::pair<Index, Index>{20, 5}, {7, 12}, {1, 3}, {9, 1}})
    {
        const ConvolutionOperator op(gaussian(nh, rng), n);
        const VectorXd s = gaussian(op.source_len(), rng);
        const VectorXd y = gaussian(n, rng);
        const MatrixXd h = op.dense();
        CHECK(rel(op.apply(s), h * s) < 1e-13);
        CHECK(rel(op.adjoint(y), h.transpose() * y) < 1e-13);
        CHECK(op.apply(s).dot(y) == Approx(s.dot(op.adjoint(y))).epsilon(1e-12));
        CHECK((op.row_gram() - h * h.transpose()).norm() < 1e-12 * (1.0 + h.squaredNorm()));
    }
    CHECK_THROWS_AS(ConvolutionOperator(VectorXd(), 3), std::invalid_argument);
    CHECK_THROWS_AS(ConvolutionOperator(VectorXd::Ones(2), 0), std::invalid_argument);
    CHECK_THROWS_AS(ConvolutionOperator(VectorXd::Ones(2), 3).apply(VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("penalty operators", "[deconv]")
{
    std::mt19937_64 rng(2);
    const Index n = 9;
    const VectorXd u = gaussian(n, rng);
    MatrixXd pd = MatrixXd::Identity(n, n) * 2.0;
    pd(0, 3) = 0.5;
    pd(6, 2) = -1.0;
    for (const Penalty &p : {Penalty::identity(), Penalty::first_difference(), Penalty::dense(pd)})
    {
        const MatrixXd m = p.matrix(n);
        CHECK(rel(p.apply(u), m * u) < 1e-14);
        CHECK(rel(p.solve(u), m.lu().solve(u)) < 1e-12);
        CHECK((p.normal(n) - m.transpose() * m).norm() < 1e-12);
        const MatrixXd h = MatrixXd::Random(4, n);
        CHECK((p.right_solve(h) - h * m.inverse()).norm() < 1e-12);
        const MatrixXd c = MatrixXd::Random(n, n);
        CHECK((p.congruence_solve(c) - m.inverse() * c * m.inverse().transpose()).norm() < 1e-11);
    }
    const MatrixXd d = Penalty::first_difference().matrix(3);
    CHECK(d(1, 0) == -1.0);
    CHECK(d(2, 2) == 1.0);
    CHECK_THROWS_AS(Penalty::dense(MatrixXd::Ones(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(Penalty::dense(MatrixXd::Zero(3, 3)).solve(VectorXd::Ones(3)), std::runtime_error);
}

TEST_CASE("ML is the exact minimum-norm solution", "[deconv]")
{
    std::mt19937_64 rng(3);
    const ConvolutionOperator op(gaussian(16, rng), 64);
    const VectorXd y = gaussian(64, rng);
    const DeconvSolution sol = solve_ml(op, y);
    CHECK(sol.residual_norm < 1e-10 * y.norm());
    CHECK(sol.rank == 64);
    CHECK_FALSE(sol.rank_deficient);

    // pseudo-inverse oracle
    const MatrixXd h = op.dense();
    Eigen::JacobiSVD<MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd pinv = svd.solve(y);
    CHECK(rel(sol.s, pinv) < 1e-9);
    CHECK_FALSE(sol.effective_lambda.has_value());
}

TEST_CASE("ML flags rank deficiency", "[deconv]")
{
    VectorXd k = VectorXd::Zero(4); // all-zero kernel: H = 0
    const ConvolutionOperator op(k, 5);
    const DeconvSolution sol = solve_ml(op, VectorXd::Ones(5));
    CHECK(sol.rank == 0);
    CHECK(sol.rank_deficient);
    CHECK(sol.s.norm() == 0.0);
}

TEST_CASE("MAP matches the dense normal-equation oracle in every form", "[deconv]")
{
    std::mt19937_64 rng(4);
    const ConvolutionOperator op(gaussian(10, rng), 30);
    const VectorXd y = gaussian(30, rng);
    const MatrixXd h = op.dense();
    const Index ns = op.source_len();

    for (double lambda : {1e-3, 0.01, 1.0, 50.0})
    {
        const VectorXd ref = map_oracle(h, MatrixXd::Identity(ns, ns), y, lambda);
        for (MapForm form : {MapForm::automatic, MapForm::primal, MapForm::dual})
        {
            const DeconvSolution sol = solve_map(op, y, {lambda, Penalty::identity(), form});
            CHECK(rel(sol.s, ref) < 1e-9);
            CHECK(*sol.effective_lambda == lambda);
            CHECK(sol.residual_norm == Approx((h * sol.s - y).norm()).epsilon(1e-12));
        }
        const DeconvSolution fd = solve_map(op, y, {lambda, Penalty::first_difference(), MapForm::automatic});
        CHECK(rel(fd.s, map_oracle(h, Penalty::first_difference().matrix(ns), y, lambda)) < 1e-9);
    }
    CHECK_THROWS_AS(solve_map(op, y, {0.1, Penalty::first_difference(), MapForm::dual}), std::invalid_argument);
    CHECK_THROWS_AS(solve_map(op, y, {-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(solve_map(op, VectorXd::Ones(29), {0.1}), std::invalid_argument);
}

TEST_CASE("MAP approaches ML as the weight vanishes and flattens as it grows", "[deconv]")
{
    std::mt19937_64 rng(5);
    const ConvolutionOperator op(gaussian(12, rng), 40);
    const VectorXd y = gaussian(40, rng);
    const VectorXd ml = solve_ml(op, y).s;
    CHECK(rel(solve_map(op, y, {1e-10}).s, ml) < 1e-6);

    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : log_grid(1e-4, 1e6, 31))
    {
        const double norm = solve_map(op, y, {lambda}).s.norm();
        CHECK(norm <= prev * (1.0 + 1e-12));
        prev = norm;
    }
    CHECK(solve_map(op, y, {1e6}).s.norm() < 1e-3 * solve_map(op, y, {1e-4}).s.norm());
}

TEST_CASE("log_grid spacing", "[deconv]")
{
    const auto g = log_grid(1e-4, 1e1, 6);
    REQUIRE(g.size() == 6);
    CHECK(g.front() == Approx(1e-4));
    CHECK(g[1] == Approx(1e-3));
    CHECK(g.back() == Approx(10.0));
    const auto d = CvConfig{}.lambda_grid;
    CHECK(d.size() == 25);
    CHECK(d.front() == Approx(1e-4));
    CHECK(d.back() == Approx(10.0));
}

TEST_CASE("EM posterior mean equals MAP at the previous weight", "[deconv][em]")
{
    std::mt19937_64 rng(6);
    for (auto [n, nh] : {std::pair<Index, Index>{64, 16}, {30, 50}})
        for (const Penalty &p : {Penalty::identity(), Penalty::first_difference()})
        {
            const ConvolutionOperator op(gaussian(nh, rng), n);
            const VectorXd y = gaussian(n, rng);
            const DeconvSolution sol = solve_em(op, y, p, 30);
            REQUIRE(sol.em_trajectory->size() == 30);
            for (const EmState &st : *sol.em_trajectory)
            {
                const VectorXd ref = map_oracle(op.dense(), p.matrix(op.source_len()), y, st.prior_lambda());
                CHECK(rel(st.mu_s, ref) < 1e-8);
            }
            CHECK(*sol.effective_lambda == Approx(sol.em_trajectory->back().lambda()));
            CHECK(sol.em_trajectory->front().prior_lambda() == 1.0);
        }
}

TEST_CASE("EM covariance and M-step against dense oracles", "[deconv][em]")
{
    std::mt19937_64 rng(7);
    const ConvolutionOperator op(gaussian(5, rng), 8); // 8 x 12
    const VectorXd y = gaussian(8, rng);
    const MatrixXd h = op.dense();
    for (const Penalty &p : {Penalty::identity(), Penalty::first_difference()})
    {
        const auto traj = *solve_em(op, y, p, 5, 0.7, 1.3).em_trajectory;
        const MatrixXd pm = p.matrix(12);
        for (const EmState &st : traj)
        {
            const double a = 1.0 / (st.prior_epsilon * st.prior_epsilon);
            const double b = 1.0 / (st.prior_gamma * st.prior_gamma);
            const MatrixXd sigma = (a * h.transpose() * h + b * pm.transpose() * pm).inverse();
            const VectorXd mu = a * sigma * h.transpose() * y;
            CHECK((st.sigma_s.dense() - sigma).norm() < 1e-9 * sigma.norm());
            CHECK(rel(st.mu_s, mu) < 1e-9);
            const double t1 = (y - h * mu).squaredNorm() + (h.transpose() * h * sigma).trace();
            const double t2 = (pm * mu).squaredNorm() + (pm.transpose() * pm * sigma).trace();
            CHECK(st.t1 == Approx(t1).epsilon(1e-9));
            CHECK(st.t2 == Approx(t2).epsilon(1e-9));
            CHECK(st.epsilon == Approx(std::sqrt(t1 / 8.0)).epsilon(1e-9));
            CHECK(st.gamma == Approx(std::sqrt(t2 / 12.0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("EM expected residual agrees with Monte-Carlo sampling of the posterior", "[deconv][em]")
{
    std::mt19937_64 rng(8);
    const ConvolutionOperator op(gaussian(5, rng), 8);
    const VectorXd y = gaussian(8, rng);
    const EmState st = solve_em(op, y, Penalty::identity(), 2).em_trajectory->back();
    const MatrixXd l = Eigen::LLT<MatrixXd>(st.sigma_s.dense()).matrixL();
    const MatrixXd h = op.dense();
    double acc = 0.0;
    const int draws = 40000;
    for (int k = 0; k < draws; ++k)
    {
        const VectorXd s = st.mu_s + l * gaussian(12, rng);
        acc += (y - h * s).squaredNorm();
    }
    CHECK(acc / draws == Approx(st.t1).epsilon(0.02));
}

TEST_CASE("EM log evidence increases along the trajectory", "[deconv][em]")
{
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 5; ++rep)
    {
        const ConvolutionOperator op(gaussian(16, rng), 64);
        const VectorXd y = op.apply(gaussian(79, rng)) + 0.1 * gaussian(64, rng);
        const DeconvSolution sol = solve_em(op, y);
        double prev = em_log_evidence(1.0, 1.0, op, y);
        for (const EmState &st : *sol.em_trajectory)
        {
            const double obj = em_objective(st, op, y);
            CHECK(obj >= prev - 1e-9 * std::max(1.0, std::abs(obj)));
            prev = obj;
        }
    }
}

TEST_CASE("log evidence matches the Gaussian density formula", "[deconv][em]")
{
    std::mt19937_64 rng(10);
    const ConvolutionOperator op(gaussian(3, rng), 6);
    const VectorXd y = gaussian(6, rng);
    const double eps = 0.4, gamma = 1.7;
    const MatrixXd h = op.dense();
    const MatrixXd c = eps * eps * MatrixXd::Identity(6, 6) + gamma * gamma * h * h.transpose();
    const double expected = -0.5 * (6.0 * std::log(2.0 * std::numbers::pi) + std::log(c.determinant()) +
                                    y.dot(c.inverse() * y));
    CHECK(em_log_evidence(eps, gamma, op, y) == Approx(expected).epsilon(1e-10));
    CHECK_THROWS_AS(em_log_evidence(0.0, 1.0, op, y), std::invalid_argument);
}

TEST_CASE("EM argument validation", "[deconv][em]")
{
    const ConvolutionOperator op(VectorXd::Ones(3), 10);
    const VectorXd y = VectorXd::Ones(10);
    CHECK_THROWS_AS(solve_em(op, y, Penalty::identity(), 0), std::invalid_argument);
    CHECK_THROWS_AS(solve_em(op, y, Penalty::identity(), 5, 0.0), std::invalid_argument);
}

TEST_CASE("cross-validation error against a per-partition dense oracle", "[deconv][cv]")
{
    std::mt19937_64 rng(11);
    const ConvolutionOperator op(gaussian(8, rng), 40);
    const VectorXd y = gaussian(40, rng);
    CvConfig cv;
    cv.partitions = 4;
    cv.lambda_grid = {0.01, 0.3, 1.0, 10.0};
    const Seed seed = 99;
    const auto err = cv_generalization_error(op, y, cv, seed);

    // Oracle: same partitions, primal MAP on the training rows, residual on the validation rows.
    const MatrixXd h = op.dense();
    std::vector<Index> rows(40);
    std::iota(rows.begin(), rows.end(), Index{0});
    std::mt19937_64 prng(seed);
    std::vector<double> expected(cv.lambda_grid.size(), 0.0);
    for (std::size_t part = 0; part < cv.partitions; ++part)
    {
        std::shuffle(rows.begin(), rows.end(), prng);
        const std::vector<Index> train(rows.begin(), rows.begin() + 28), valid(rows.begin() + 28, rows.end());
        const MatrixXd ht = h(train, Eigen::all);
        const MatrixXd hv = h(valid, Eigen::all);
        for (std::size_t k = 0; k < cv.lambda_grid.size(); ++k)
        {
            const VectorXd s = map_oracle(ht, MatrixXd::Identity(47, 47), y(train), cv.lambda_grid[k]);
            expected[k] += (hv * s - y(valid)).norm() / static_cast<double>(cv.partitions);
        }
    }
    for (std::size_t k = 0; k < err.size(); ++k)
        CHECK(err[k] == Approx(expected[k]).epsilon(1e-8));
}

TEST_CASE("cross-validation prefers the small weight on exact data", "[deconv][cv]")
{
    std::mt19937_64 rng(12);
    const ConvolutionOperator op(gaussian(6, rng), 60);
    const VectorXd y = op.apply(gaussian(65, rng));
    CvConfig cv;
    cv.lambda_grid = {1e-6, 1.0};
    const DeconvSolution sol = solve_map_cv(op, y, cv, 3);
    CHECK(*sol.effective_lambda == 1e-6);
    REQUIRE(sol.cv_error.size() == 2);
    CHECK(sol.cv_error[0] < sol.cv_error[1]);

    // deterministic for a fixed seed
    CHECK(solve_map_cv(op, y, cv, 3).s == sol.s);
}

TEST_CASE("cross-validation configuration checks", "[deconv][cv]")
{
    const ConvolutionOperator op(VectorXd::Ones(3), 20);
    CvConfig cv;
    CHECK_THROWS_AS(solve_map_cv(op, VectorXd::Ones(20), cv, 1), std::invalid_argument); // 6 validation rows
    cv.partitions = 0;
    CHECK_THROWS_AS(cv.validate(), std::invalid_argument);
    cv = {};
    cv.train_fraction = 1.0;
    CHECK_THROWS_AS(cv.validate(), std::invalid_argument);
    cv = {};
    cv.lambda_grid.clear();
    CHECK_THROWS_AS(cv.validate(), std::invalid_argument);
}

TEST_CASE("method parsing and dispatch", "[deconv]")
{
    CHECK(parse_deconv_choice("ml").method == DeconvMethod::ml);
    CHECK(parse_deconv_choice("em").method == DeconvMethod::em);
    CHECK(parse_deconv_choice("map-cv").method == DeconvMethod::map_cv);
    CHECK(parse_deconv_choice("map:0.01").lambda == 0.01);
    CHECK(parse_deconv_choice("map(1)").lambda == 1.0);
    CHECK(parse_deconv_choice("map").lambda == 0.01);
    CHECK(parse_deconv_choice("map:0.01").label() == "map:0.01");
    CHECK(parse_deconv_choice("map:1").label() == "map:1");
    CHECK(parse_deconv_choice("map:1e-07").label() == "map:1e-07");
    CHECK(parse_deconv_choice("em").label() == "em");
    CHECK_THROWS_AS(parse_deconv_choice("lasso"), std::invalid_argument);
    CHECK_THROWS_AS(parse_deconv_choice("map:abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_deconv_choice("map:-1"), std::invalid_argument);

    std::mt19937_64 rng(13);
    const ConvolutionOperator op(gaussian(4, rng), 40);
    const VectorXd y = gaussian(40, rng);
    CHECK(solve(op, y, parse_deconv_choice("map:0.5"), CvConfig{}, 1).s == solve_map(op, y, {0.5}).s);
    CHECK(solve(op, y, parse_deconv_choice("ml"), CvConfig{}, 1).s == solve_ml(op, y).s);
}
