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

#ifndef CHWHISPER_DECONVOLUTION_HPP
#define CHWHISPER_DECONVOLUTION_HPP

#include "seed.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chwhisper {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Valid-part convolution operator
// ---------------------------------------------------------------------------

/// Maps an s-signal of N_s = N + N_h - 1 samples to the N samples of
/// kernel * s where kernel and s overlap entirely:
///   (H s)[i] = sum_j kernel[j] * s[i + N_h - 1 - j],  i = 0 .. N-1.
/// Every row of H holds the whole kernel, so H H^T is Toeplitz.
class ConvolutionOperator
{
public:
    ConvolutionOperator(VectorXd kernel, Index target_len) : kernel_(std::move(kernel)), target_len_(target_len)
    {
        if (kernel_.size() == 0)
            throw std::invalid_argument("ConvolutionOperator: empty kernel");
        if (target_len_ < 1)
            throw std::invalid_argument("ConvolutionOperator: target length must be >= 1");
    }

    Index target_len() const { return target_len_; }
    Index kernel_len() const { return kernel_.size(); }
    Index source_len() const { return target_len_ + kernel_.size() - 1; }
    const VectorXd &kernel() const { return kernel_; }

    VectorXd apply(const VectorXd &s) const
    {
        if (s.size() != source_len())
            throw std::invalid_argument("ConvolutionOperator::apply: wrong source length");
        const Index nh = kernel_len();
        VectorXd y(target_len_);
        for (Index i = 0; i < target_len_; ++i)
            y(i) = s.segment(i, nh).dot(kernel_.reverse());
        return y;
    }

    VectorXd adjoint(const VectorXd &y) const
    {
        if (y.size() != target_len_)
            throw std::invalid_argument("ConvolutionOperator::adjoint: wrong target length");
        const Index nh = kernel_len();
        VectorXd s = VectorXd::Zero(source_len());
        for (Index i = 0; i < target_len_; ++i)
            s.segment(i, nh) += y(i) * kernel_.reverse();
        return s;
    }

    MatrixXd dense() const
    {
        const Index nh = kernel_len();
        MatrixXd h = MatrixXd::Zero(target_len_, source_len());
        for (Index i = 0; i < target_len_; ++i)
            h.row(i).segment(i, nh) = kernel_.reverse().transpose();
        return h;
    }

    /// H H^T, built from the kernel autocorrelation.
    MatrixXd row_gram() const
    {
        const Index nh = kernel_len();
        VectorXd acf = VectorXd::Zero(target_len_);
        for (Index lag = 0; lag < std::min(nh, target_len_); ++lag)
            acf(lag) = kernel_.head(nh - lag).dot(kernel_.tail(nh - lag));
        MatrixXd g(target_len_, target_len_);
        for (Index i = 0; i < target_len_; ++i)
            for (Index j = 0; j < target_len_; ++j)
                g(i, j) = acf(std::abs(i - j));
        return g;
    }

private:
    VectorXd kernel_;
    Index target_len_;
};

inline ConvolutionOperator build_operator(const VectorXd &kernel, Index target_len)
{
    return ConvolutionOperator(kernel, target_len);
}

// ---------------------------------------------------------------------------
// Penalty operator P
// ---------------------------------------------------------------------------

/// Square penalty operator on the s-signal. Identity (minimum energy) by
/// default; `first_difference` is the [1, -1] kernel, (P s)[n] = s[n] - s[n-1]
/// with s[-1] = 0, which keeps P invertible.
class Penalty
{
public:
    enum class Kind
    {
        identity,
        first_difference,
        dense
    };

    static Penalty identity() { return Penalty(Kind::identity, {}); }
    static Penalty first_difference() { return Penalty(Kind::first_difference, {}); }
    static Penalty dense(MatrixXd p)
    {
        if (p.rows() != p.cols())
            throw std::invalid_argument("Penalty: matrix must be square");
        return Penalty(Kind::dense, std::move(p));
    }

    Kind kind() const { return kind_; }
    bool is_identity() const { return kind_ == Kind::identity; }

    MatrixXd matrix(Index n) const
    {
        switch (kind_)
        {
        case Kind::identity:
            return MatrixXd::Identity(n, n);
        case Kind::first_difference: {
            MatrixXd p = MatrixXd::Identity(n, n);
            for (Index k = 1; k < n; ++k)
                p(k, k - 1) = -1.0;
            return p;
        }
        case Kind::dense:
            check_size(n);
            return matrix_;
        }
        return {};
    }

    MatrixXd normal(Index n) const
    {
        if (kind_ == Kind::identity)
            return MatrixXd::Identity(n, n);
        const MatrixXd p = matrix(n);
        return p.transpose() * p;
    }

    VectorXd apply(const VectorXd &s) const
    {
        switch (kind_)
        {
        case Kind::identity:
            return s;
        case Kind::first_difference: {
            VectorXd out = s;
            for (Index k = s.size() - 1; k >= 1; --k)
                out(k) -= s(k - 1);
            return out;
        }
        case Kind::dense:
            check_size(s.size());
            return matrix_ * s;
        }
        return s;
    }

    /// P^{-1} u
    VectorXd solve(const VectorXd &u) const
    {
        switch (kind_)
        {
        case Kind::identity:
            return u;
        case Kind::first_difference: {
            VectorXd out = u;
            for (Index k = 1; k < u.size(); ++k)
                out(k) += out(k - 1);
            return out;
        }
        case Kind::dense:
            return lu(u.size()).solve(u);
        }
        return u;
    }

    /// H P^{-1} for a dense H with N_s columns.
    MatrixXd right_solve(const MatrixXd &h) const
    {
        switch (kind_)
        {
        case Kind::identity:
            return h;
        case Kind::first_difference: {
            // (H P^{-1})[:, k] = sum_{m >= k} H[:, m]
            MatrixXd g = h;
            for (Index k = h.cols() - 2; k >= 0; --k)
                g.col(k) += g.col(k + 1);
            return g;
        }
        case Kind::dense:
        {
            check_size(h.cols());
            const Eigen::PartialPivLU<MatrixXd> ft(matrix_.transpose());
            return MatrixXd(ft.solve(h.transpose())).transpose();
        }
        }
        return h;
    }

    /// P^{-1} M P^{-T}
    MatrixXd congruence_solve(const MatrixXd &m) const
    {
        if (kind_ == Kind::identity)
            return m;
        MatrixXd left(m.rows(), m.cols());
        for (Index c = 0; c < m.cols(); ++c)
            left.col(c) = solve(m.col(c));
        MatrixXd out(m.rows(), m.cols());
        const MatrixXd lt = left.transpose();
        for (Index c = 0; c < m.cols(); ++c)
            out.col(c) = solve(lt.col(c));
        return out.transpose();
    }

private:
    Penalty(Kind k, MatrixXd m) : kind_(k), matrix_(std::move(m)) {}

    void check_size(Index n) const
    {
        if (matrix_.rows() != n)
            throw std::invalid_argument("Penalty: size does not match the s-signal length");
    }

    Eigen::PartialPivLU<MatrixXd> lu(Index n) const
    {
        check_size(n);
        Eigen::PartialPivLU<MatrixXd> f(matrix_);
        if (!(std::abs(f.determinant()) > 0.0))
            throw std::runtime_error("Penalty: operator is singular");
        return f;
    }

    Kind kind_;
    MatrixXd matrix_;
};

// ---------------------------------------------------------------------------
// Configurations and results
// ---------------------------------------------------------------------------

enum class MapForm
{
    automatic, // dual (N x N) system when P = I and N < N_s, else primal
    primal,    // (H^T H + lambda P^T P) s = H^T y
    dual       // s = H^T (H H^T + lambda I)^{-1} y, P = I only
};

struct MapConfig
{
    double lambda = 0.01;
    Penalty penalty = Penalty::identity();
    MapForm form = MapForm::automatic;
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t points)
{
    if (!(lo > 0.0) || !(hi >= lo) || points == 0)
        throw std::invalid_argument("log_grid: need 0 < lo <= hi and points >= 1");
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
    {
        const double t = points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(points - 1);
        g[k] = std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
    }
    return g;
}

struct CvConfig
{
    std::size_t partitions = 20;
    double train_fraction = 0.7;
    std::vector<double> lambda_grid = log_grid(1e-4, 1e1, 25);
    Penalty penalty = Penalty::identity();

    void validate() const
    {
        if (partitions == 0)
            throw std::invalid_argument("CvConfig: partitions must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("CvConfig: train_fraction must lie in (0, 1)");
        if (lambda_grid.empty())
            throw std::invalid_argument("CvConfig: empty lambda grid");
        for (std::size_t k = 0; k < lambda_grid.size(); ++k)
        {
            if (!(lambda_grid[k] > 0.0))
                throw std::invalid_argument("CvConfig: lambda grid must be positive");
            if (k > 0 && !(lambda_grid[k] > lambda_grid[k - 1]))
                throw std::invalid_argument("CvConfig: lambda grid must be sorted ascending");
        }
    }
};

/// Posterior covariance of the EM model in factored form,
///   Sigma_s = P^{-1} (c I + B diag(w) B^T) P^{-T},
/// where the basis B is shared by every iteration of one solve.
class PosteriorCovariance
{
public:
    PosteriorCovariance() = default;
    PosteriorCovariance(double scalar, std::shared_ptr<const MatrixXd> basis, VectorXd weights, Penalty penalty)
        : scalar_(scalar), basis_(std::move(basis)), weights_(std::move(weights)), penalty_(std::move(penalty))
    {
    }

    Index size() const { return basis_ ? basis_->rows() : 0; }

    MatrixXd dense() const
    {
        const MatrixXd &b = *basis_;
        MatrixXd sigma_u = b * weights_.asDiagonal() * b.transpose();
        sigma_u.diagonal().array() += scalar_;
        return penalty_.congruence_solve(sigma_u);
    }

private:
    double scalar_ = 0.0;
    std::shared_ptr<const MatrixXd> basis_;
    VectorXd weights_;
    Penalty penalty_ = Penalty::identity();
};

// One EM iteration i: posterior (mu_s, Sigma_s) computed with the previous
// parameters (epsilon_{i-1}, gamma_{i-1}), then the M-step values
// (epsilon_i, gamma_i).
struct EmState
{
    int iteration = 0;
    double prior_epsilon = 1.0;
    double prior_gamma = 1.0;
    double epsilon = 1.0;
    double gamma = 1.0;
    double t1 = 0.0;
    double t2 = 0.0;
    VectorXd mu_s;
    PosteriorCovariance sigma_s;

    double prior_lambda() const { return prior_epsilon * prior_epsilon / (prior_gamma * prior_gamma); }
    double lambda() const { return epsilon * epsilon / (gamma * gamma); }
};

struct DeconvSolution
{
    VectorXd s;
    double residual_norm = 0.0; // ||H s - y||
    std::optional<double> effective_lambda;
    std::optional<std::vector<EmState>> em_trajectory;
    Index rank = -1;             // numerical rank of H (ML only)
    bool rank_deficient = false; // rank(H) < N: exact fit not guaranteed
    std::vector<double> cv_error; // mean generalization error per grid point (MAP-CV only)
};

namespace detail {

inline double residual_of(const ConvolutionOperator &op, const VectorXd &s, const VectorXd &y)
{
    return (op.apply(s) - y).norm();
}

inline void check_target(const ConvolutionOperator &op, const VectorXd &y)
{
    if (y.size() != op.target_len())
        throw std::invalid_argument("deconvolution: target length does not match the operator");
}

// Cholesky of an SPD matrix that refuses numerically singular input.
inline Eigen::LLT<MatrixXd> spd_factor(const MatrixXd &a)
{
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("deconvolution: regularized normal matrix is singular");
    const VectorXd d = llt.matrixLLT().diagonal().cwiseAbs2();
    if (!(d.minCoeff() > 1e3 * std::numeric_limits<double>::epsilon() * d.maxCoeff() * static_cast<double>(a.rows())))
        throw std::runtime_error("deconvolution: regularized normal matrix is numerically singular");
    return llt;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Least-squares solution of H s = y. The system is underdetermined, so the
/// minimum-norm solution is returned (complete orthogonal decomposition).
inline DeconvSolution solve_ml(const ConvolutionOperator &op, const VectorXd &y)
{
    detail::check_target(op, y);
    const MatrixXd h = op.dense();
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(h);
    DeconvSolution out;
    out.s = cod.solve(y);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < op.target_len();
    out.residual_norm = detail::residual_of(op, out.s, y);
    return out;
}

/// Tikhonov solution (H^T H + lambda P^T P)^{-1} H^T y.
inline DeconvSolution solve_map(const ConvolutionOperator &op, const VectorXd &y, const MapConfig &cfg)
{
    detail::check_target(op, y);
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
        throw std::invalid_argument("solve_map: lambda must be finite and >= 0");

    bool dual = false;
    switch (cfg.form)
    {
    case MapForm::automatic:
        dual = cfg.penalty.is_identity() && op.target_len() < op.source_len() && cfg.lambda > 0.0;
        break;
    case MapForm::dual:
        if (!cfg.penalty.is_identity())
            throw std::invalid_argument("solve_map: dual form requires P = I");
        dual = true;
        break;
    case MapForm::primal:
        break;
    }

    DeconvSolution out;
    if (dual)
    {
        MatrixXd g = op.row_gram();
        g.diagonal().array() += cfg.lambda;
        out.s = op.adjoint(detail::spd_factor(g).solve(y));
    }
    else
    {
        const MatrixXd h = op.dense();
        MatrixXd a = h.transpose() * h;
        if (cfg.lambda > 0.0)
            a += cfg.lambda * cfg.penalty.normal(op.source_len());
        out.s = detail::spd_factor(a).solve(op.adjoint(y));
    }
    out.effective_lambda = cfg.lambda;
    out.residual_norm = detail::residual_of(op, out.s, y);
    return out;
}

/// Mean validation residual ||H_v s_t(lambda) - y_v|| over random 70/30 row
/// partitions, for every lambda of the grid.
inline std::vector<double> cv_generalization_error(const ConvolutionOperator &op, const VectorXd &y, const CvConfig &cv,
                                                   Seed seed)
{
    detail::check_target(op, y);
    cv.validate();
    const Index n = op.target_len();
    const auto n_train = static_cast<Index>(std::llround(cv.train_fraction * static_cast<double>(n)));
    if (n_train < 10 || n - n_train < 10)
        throw std::invalid_argument("solve_map_cv: need at least 10 training and 10 validation rows");

    // u = P s turns every penalty into the identity: H s = (H P^{-1}) u.
    // Training and validation products are blocks of the row Gram G G^T.
    MatrixXd gram;
    if (cv.penalty.is_identity())
        gram = op.row_gram();
    else
    {
        const MatrixXd g = cv.penalty.right_solve(op.dense());
        gram = g * g.transpose();
    }

    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    std::mt19937_64 rng(seed);

    std::vector<double> mean_err(cv.lambda_grid.size(), 0.0);
    for (std::size_t part = 0; part < cv.partitions; ++part)
    {
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::vector<Index> train(rows.begin(), rows.begin() + n_train);
        const std::vector<Index> valid(rows.begin() + n_train, rows.end());

        // u_t(lambda) = G_t^T (G_t G_t^T + lambda I)^{-1} y_t with G_t G_t^T = Q D Q^T
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(MatrixXd(gram(train, train)));
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("solve_map_cv: eigendecomposition failed");
        const VectorXd d = eig.eigenvalues().cwiseMax(0.0);
        const VectorXd z = eig.eigenvectors().transpose() * y(train);
        const MatrixXd predictor = gram(valid, train) * eig.eigenvectors();
        const VectorXd y_v = y(valid);

        for (std::size_t k = 0; k < cv.lambda_grid.size(); ++k)
        {
            const VectorXd w = z.array() / (d.array() + cv.lambda_grid[k]);
            mean_err[k] += (predictor * w - y_v).norm();
        }
    }
    for (double &e : mean_err)
        e /= static_cast<double>(cv.partitions);
    return mean_err;
}

/// MAP with lambda chosen by cross-validation over `cv.lambda_grid`
/// (smallest lambda on ties), followed by a solve on all rows.
inline DeconvSolution solve_map_cv(const ConvolutionOperator &op, const VectorXd &y, const CvConfig &cv, Seed seed)
{
    const auto err = cv_generalization_error(op, y, cv, seed);
    const auto best = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
    DeconvSolution out = solve_map(op, y, MapConfig{cv.lambda_grid[best], cv.penalty, MapForm::automatic});
    out.cv_error = err;
    return out;
}

/// Expectation-maximization for y = H s + e, e ~ N(0, eps^2 I), P s ~ N(0, gamma^2 I).
///
/// Iteration i computes
///   Sigma_s = (eps^-2 H^T H + gamma^-2 P^T P)^{-1},  mu_s = eps^-2 Sigma_s H^T y
/// with the previous (eps, gamma), then
///   eps^2   = T1 / N,    T1 = ||y - H mu_s||^2 + Tr(H^T H Sigma_s)
///   gamma^2 = T2 / N_s,  T2 = ||P mu_s||^2 + Tr(P^T P Sigma_s).
///
/// With u = P s and G = H P^{-1} the model has an identity prior, and one
/// eigendecomposition of the smaller Gram matrix of G gives every iteration
/// in closed form; the posterior mean then equals the MAP solution with
/// lambda = eps^2 / gamma^2.
inline DeconvSolution solve_em(const ConvolutionOperator &op, const VectorXd &y, const Penalty &penalty = Penalty::identity(),
                               int iters = 30, double eps0 = 1.0, double gamma0 = 1.0)
{
    detail::check_target(op, y);
    if (iters < 1)
        throw std::invalid_argument("solve_em: iters must be >= 1");
    if (!(eps0 > 0.0) || !(gamma0 > 0.0))
        throw std::invalid_argument("solve_em: initial parameters must be > 0");

    const Index n = op.target_len();
    const Index ns = op.source_len();
    const MatrixXd g = penalty.right_solve(op.dense());
    const bool dual = n <= ns;

    MatrixXd gram;
    if (dual)
        gram = penalty.is_identity() ? op.row_gram() : MatrixXd(g * g.transpose());
    else
        gram = g.transpose() * g;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("solve_em: eigendecomposition failed");
    const VectorXd d = eig.eigenvalues().cwiseMax(0.0);
    const MatrixXd &q = eig.eigenvectors();

    // dual:   G G^T = Q D Q^T, B = G^T Q, z = Q^T y
    // primal: G^T G = Q D Q^T, B = Q,     z = Q^T G^T y
    auto basis = std::make_shared<const MatrixXd>(dual ? MatrixXd(g.transpose() * q) : q);
    const VectorXd z = dual ? VectorXd(q.transpose() * y) : VectorXd(q.transpose() * (g.transpose() * y));

    std::vector<EmState> trajectory;
    trajectory.reserve(static_cast<std::size_t>(iters));
    double eps = eps0, gamma = gamma0;

    for (int i = 1; i <= iters; ++i)
    {
        const double a = 1.0 / (eps * eps);
        const double b = 1.0 / (gamma * gamma);
        const double lambda = b == 0.0 ? 0.0 : (eps * eps) / (gamma * gamma);

        const VectorXd shrink = (d.array() + lambda).inverse(); // 1 / (d + lambda)
        const VectorXd mu_u = *basis * (z.array() * shrink.array()).matrix();
        const double fit = (y - g * mu_u).squaredNorm();
        const double tr_hh_sigma = (d.array() / (a * d.array() + b)).sum();

        double tr_sigma = 0.0;
        PosteriorCovariance cov;
        if (dual)
        {
            // Sigma_u = (1/b) (I - B diag(1 / (d + lambda)) B^T)
            tr_sigma = (static_cast<double>(ns) - (d.array() * shrink.array()).sum()) / b;
            cov = PosteriorCovariance(1.0 / b, basis, -shrink / b, penalty);
        }
        else
        {
            const VectorXd w = (a * d.array() + b).inverse();
            tr_sigma = w.sum();
            cov = PosteriorCovariance(0.0, basis, w, penalty);
        }

        EmState st;
        st.iteration = i;
        st.prior_epsilon = eps;
        st.prior_gamma = gamma;
        st.t1 = fit + tr_hh_sigma;
        st.t2 = mu_u.squaredNorm() + tr_sigma;
        st.epsilon = std::sqrt(st.t1 / static_cast<double>(n));
        st.gamma = std::sqrt(st.t2 / static_cast<double>(ns));
        st.mu_s = penalty.solve(mu_u);
        st.sigma_s = std::move(cov);

        if (!(st.epsilon > 0.0) || !(st.gamma > 0.0) || !std::isfinite(st.epsilon) || !std::isfinite(st.gamma))
            throw std::runtime_error("solve_em: precision matrix became singular");
        eps = st.epsilon;
        gamma = st.gamma;
        trajectory.push_back(std::move(st));
    }

    DeconvSolution out;
    out.s = trajectory.back().mu_s;
    out.effective_lambda = trajectory.back().lambda();
    out.residual_norm = detail::residual_of(op, out.s, y);
    out.em_trajectory = std::move(trajectory);
    return out;
}

/// Observed-data log-likelihood log p(y | eps, gamma) with
/// y ~ N(0, eps^2 I + gamma^2 H (P^T P)^{-1} H^T), evaluated densely.
inline double em_log_evidence(double epsilon, double gamma, const ConvolutionOperator &op, const VectorXd &y,
                              const Penalty &penalty = Penalty::identity())
{
    detail::check_target(op, y);
    if (!(epsilon > 0.0) || !(gamma > 0.0))
        throw std::invalid_argument("em_objective: parameters must be > 0");
    const Index n = op.target_len();
    MatrixXd cov(n, n);
    if (penalty.is_identity())
        cov = op.row_gram();
    else
    {
        const MatrixXd g = penalty.right_solve(op.dense());
        cov = g * g.transpose();
    }
    cov *= gamma * gamma;
    cov.diagonal().array() += epsilon * epsilon;

    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("em_objective: covariance is not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = y.dot(llt.solve(y));
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

inline double em_objective(const EmState &state, const ConvolutionOperator &op, const VectorXd &y,
                           const Penalty &penalty = Penalty::identity())
{
    return em_log_evidence(state.epsilon, state.gamma, op, y, penalty);
}

// ---------------------------------------------------------------------------
// Method selection
// ---------------------------------------------------------------------------

enum class DeconvMethod
{
    ml,
    map,
    map_cv,
    em
};

struct DeconvChoice
{
    DeconvMethod method = DeconvMethod::map;
    double lambda = 0.01; // MAP only

    std::string label() const
    {
        switch (method)
        {
        case DeconvMethod::ml:
            return "ml";
        case DeconvMethod::map: {
            std::ostringstream os;
            os.precision(12);
            os << lambda;
            return "map:" + os.str();
        }
        case DeconvMethod::map_cv:
            return "map-cv";
        case DeconvMethod::em:
            return "em";
        }
        return "?";
    }
};

inline DeconvChoice parse_deconv_choice(const std::string &text)
{
    if (text == "ml")
        return {DeconvMethod::ml, 0.0};
    if (text == "map-cv" || text == "map_cv")
        return {DeconvMethod::map_cv, 0.0};
    if (text == "em")
        return {DeconvMethod::em, 0.0};
    if (text.rfind("map", 0) == 0)
    {
        if (text.size() == 3)
            return {DeconvMethod::map, 0.01};
        if (text[3] != ':' && text[3] != '(')
            throw std::invalid_argument("unknown deconvolution method '" + text + "'");
        std::string num = text.substr(4);
        if (!num.empty() && num.back() == ')')
            num.pop_back();
        std::size_t used = 0;
        const double lambda = std::stod(num, &used);
        if (used != num.size() || !(lambda >= 0.0))
            throw std::invalid_argument("bad MAP weight in '" + text + "'");
        return {DeconvMethod::map, lambda};
    }
    throw std::invalid_argument("unknown deconvolution method '" + text + "'");
}

inline DeconvSolution solve(const ConvolutionOperator &op, const VectorXd &y, const DeconvChoice &choice,
                            const CvConfig &cv, Seed seed)
{
    switch (choice.method)
    {
    case DeconvMethod::ml:
        return solve_ml(op, y);
    case DeconvMethod::map:
        return solve_map(op, y, MapConfig{choice.lambda, cv.penalty, MapForm::automatic});
    case DeconvMethod::map_cv:
        return solve_map_cv(op, y, cv, seed);
    case DeconvMethod::em:
        return solve_em(op, y, cv.penalty);
    }
    throw std::invalid_argument("solve: unknown method");
}

} // namespace chwhisper

#endif
