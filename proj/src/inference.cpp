#include "ovepg/inference.hpp"

#include <cmath>
#include <future>
#include <numbers>
#include <stdexcept>

#include "ovepg/pg_random.hpp"

namespace ovepg {

std::vector<const ChainState*> ChainTrajectory::post_burn_in() const {
    std::vector<const ChainState*> kept;
    const std::size_t start = states.size() / 2;
    for (std::size_t t = start; t < states.size(); ++t) kept.push_back(&states[t]);
    return kept;
}

AugmentationState sample_omega_conditional(const VectorXd& psi, RngStream& rng) {
    if (!psi.allFinite()) throw std::invalid_argument("psi must be finite");
    VectorXd omega(psi.size());
    for (Eigen::Index j = 0; j < psi.size(); ++j) omega[j] = sample_pg1(psi[j], rng);
    return AugmentationState{std::move(omega)};
}

VectorXd sample_f_conditional_naive(const BlockKernelMatrix& K, const VectorXd& mu,
                                    const OveTransform& A, const AugmentationState& state,
                                    RngStream& rng) {
    const Eigen::Index d = K.dim();
    if (mu.size() != d || state.omega.size() != d || A.dim() != d)
        throw std::invalid_argument("shape error in conditional sampler");

    const MatrixXd Ad = A.dense();
    const MatrixXd Kd = K.dense_full();
    const MatrixXd precision =
        Kd.llt().solve(MatrixXd::Identity(d, d)) +
        Ad.transpose() * state.omega.asDiagonal() * Ad;

    Eigen::LLT<MatrixXd> llt(0.5 * (precision + precision.transpose()));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("not positive definite: conditional precision");

    const VectorXd kappa = VectorXd::Constant(d, PairwiseLogits::kappa);
    const VectorXd rhs = Kd.llt().solve(mu) + A.apply_transpose(kappa);
    const VectorXd mean = llt.solve(rhs);

    VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    // precision = L L^T  =>  f = mean + L^{-T} z has covariance precision^{-1}.
    const VectorXd noise = llt.matrixU().solve(z);
    return mean + noise;
}

EfficientSolver::EfficientSolver(const BlockKernelMatrix& K, const OveTransform& A,
                                 const VectorXd& omega)
    : K_(&K), A_(&A), omega_(omega) {
    const int n = K.n();
    const int c = K.num_classes();
    if (omega.size() != K.dim() || A.dim() != K.dim())
        throw std::invalid_argument("shape error in efficient solver");
    if ((omega.array() <= 0.0).any())
        throw std::invalid_argument("omega must be strictly positive");

    // D = Omega + diag(d), d_i^c = Y_ic sum_{c'} omega_i^{c'}.
    VectorXd omega_row_sum = VectorXd::Zero(n);
    for (int cc = 0; cc < c; ++cc)
        omega_row_sum += omega.segment(static_cast<Eigen::Index>(cc) * n, n);
    d_diag_ = omega;
    for (int i = 0; i < n; ++i)
        d_diag_[stacked_index(A.label_of(i), i, n)] += omega_row_sum[i];

    // E^c = (K_N^{-1} + D_c)^{-1} = K_N - (K_N R)(I + R K_N R)^{-1}(R K_N),
    // R = D_c^{1/2}. Accumulates log det B_c for the determinant identity.
    e_blocks_.resize(c);
    const MatrixXd& Kn = K.base();
    for (int cc = 0; cc < c; ++cc) {
        const VectorXd r = d_diag_.segment(static_cast<Eigen::Index>(cc) * n, n).array().sqrt();
        MatrixXd B = r.asDiagonal() * Kn * r.asDiagonal();
        B.diagonal().array() += 1.0;
        Eigen::LLT<MatrixXd> llt_b(B);
        if (llt_b.info() != Eigen::Success)
            throw std::runtime_error("numerical breakdown: inner block factorization failed");
        const MatrixXd KnR = Kn * r.asDiagonal();
        MatrixXd E = Kn - KnR * llt_b.solve(KnR.transpose());
        e_blocks_[cc] = 0.5 * (E + E.transpose());
        for (int i = 0; i < n; ++i) log_det_b_sum_ += 2.0 * std::log(llt_b.matrixLLT()(i, i));
    }

    // G = S^T E S - P, assembled from elementwise-scaled copies of E^c.
    MatrixXd ses = MatrixXd::Zero(2 * n, 2 * n);
    for (int cc = 0; cc < c; ++cc) {
        const MatrixXd& E = e_blocks_[cc];
        const VectorXd w = omega.segment(static_cast<Eigen::Index>(cc) * n, n);
        VectorXd y = VectorXd::Zero(n);
        for (int i = 0; i < n; ++i)
            if (A.label_of(i) == cc) y[i] = 1.0;
        ses.topLeftCorner(n, n) += y.asDiagonal() * E * y.asDiagonal();
        ses.topRightCorner(n, n) += y.asDiagonal() * E * w.asDiagonal();
        ses.bottomRightCorner(n, n) += w.asDiagonal() * E * w.asDiagonal();
    }
    ses.bottomLeftCorner(n, n) = ses.topRightCorner(n, n).transpose();

    MatrixXd G = ses;
    G.topRightCorner(n, n).diagonal().array() -= 1.0;
    G.bottomLeftCorner(n, n).diagonal().array() -= 1.0;
    g_lu_.compute(G);

    // log det (I - S^T E S P): P swaps the block columns of ses.
    MatrixXd M = MatrixXd::Identity(2 * n, 2 * n);
    M.leftCols(n) -= ses.rightCols(n);
    M.rightCols(n) -= ses.leftCols(n);
    Eigen::PartialPivLU<MatrixXd> lu_m(M);
    double log_abs = 0.0;
    double sign = lu_m.permutationP().determinant() > 0 ? 1.0 : -1.0;
    const auto& U = lu_m.matrixLU();
    for (int i = 0; i < 2 * n; ++i) {
        const double u = U(i, i);
        if (u == 0.0) throw std::runtime_error("numerical breakdown: singular inner system");
        if (u < 0.0) sign = -sign;
        log_abs += std::log(std::fabs(u));
    }
    if (sign <= 0.0) throw std::runtime_error("numerical breakdown: inner determinant sign flip");
    log_det_g_term_ = log_abs;
}

VectorXd EfficientSolver::apply_E(const VectorXd& u) const {
    const int n = K_->n();
    VectorXd out(u.size());
    for (int cc = 0; cc < K_->num_classes(); ++cc) {
        const Eigen::Index off = static_cast<Eigen::Index>(cc) * n;
        out.segment(off, n) = e_blocks_[cc] * u.segment(off, n);
    }
    return out;
}

VectorXd EfficientSolver::apply_S_transpose(const VectorXd& u) const {
    const int n = K_->n();
    const int c = K_->num_classes();
    VectorXd w = VectorXd::Zero(2 * n);
    for (int i = 0; i < n; ++i)
        w[i] = u[stacked_index(A_->label_of(i), i, n)];
    for (int cc = 0; cc < c; ++cc) {
        const Eigen::Index off = static_cast<Eigen::Index>(cc) * n;
        w.tail(n) += omega_.segment(off, n).cwiseProduct(u.segment(off, n));
    }
    return w;
}

VectorXd EfficientSolver::apply_S(const VectorXd& w) const {
    const int n = K_->n();
    const int c = K_->num_classes();
    VectorXd out(static_cast<Eigen::Index>(n) * c);
    for (int cc = 0; cc < c; ++cc) {
        const Eigen::Index off = static_cast<Eigen::Index>(cc) * n;
        for (int i = 0; i < n; ++i) {
            const double y = (A_->label_of(i) == cc) ? 1.0 : 0.0;
            out[off + i] = y * w[i] + omega_[off + i] * w[n + i];
        }
    }
    return out;
}

VectorXd EfficientSolver::apply_At_Omega_A(const VectorXd& u) const {
    const int n = K_->n();
    VectorXd w = apply_S_transpose(u);
    VectorXd swapped(2 * n);
    swapped.head(n) = w.tail(n);
    swapped.tail(n) = w.head(n);
    return d_diag_.cwiseProduct(u) - apply_S(swapped);
}

VectorXd EfficientSolver::solve_precision(const VectorXd& u) const {
    const VectorXd eu = apply_E(u);
    const VectorXd rhs = apply_S_transpose(eu);
    const VectorXd sol = g_lu_.solve(rhs);
    return eu - apply_E(apply_S(sol));
}

VectorXd EfficientSolver::solve_psi_cov(const VectorXd& u) const {
    // (A K A^T + Omega^{-1})^{-1} = Omega - Omega A (K^{-1} + A^T Omega A)^{-1} A^T Omega.
    const VectorXd wu = omega_.cwiseProduct(u);
    const VectorXd t = solve_precision(A_->apply_transpose(wu));
    return wu - omega_.cwiseProduct(A_->apply(t));
}

double EfficientSolver::log_det_psi_cov() const {
    // det(A K A^T + Omega^{-1})
    //   = det(Omega^{-1}) * prod_c det(B_c) * det(I - S^T E S P).
    return -omega_.array().log().sum() + log_det_b_sum_ + log_det_g_term_;
}

VectorXd efficient_fbar_from(const BlockKernelMatrix& K, const OveTransform& A,
                             const VectorXd& omega, const VectorXd& f0, const VectorXd& z0) {
    const EfficientSolver solver(K, A, omega);
    const VectorXd kappa = VectorXd::Constant(K.dim(), PairwiseLogits::kappa);
    const VectorXd resid = omega.cwiseInverse().cwiseProduct(kappa) - z0;
    const VectorXd v = A.apply_transpose(omega.cwiseProduct(resid));
    const VectorXd t = solver.solve_precision(v);
    return f0 + K.multiply(v - solver.apply_At_Omega_A(t));
}

VectorXd sample_f_conditional_efficient(const BlockKernelMatrix& K, const VectorXd& mu,
                                        const OveTransform& A, const AugmentationState& state,
                                        RngStream& rng) {
    const Eigen::Index d = K.dim();
    if (mu.size() != d || state.omega.size() != d || A.dim() != d)
        throw std::invalid_argument("shape error in conditional sampler");
    const VectorXd f0 = K.sample_prior(mu, rng);
    VectorXd z0 = A.apply(f0);
    for (Eigen::Index j = 0; j < d; ++j)
        z0[j] += rng.normal() / std::sqrt(state.omega[j]);
    return efficient_fbar_from(K, A, state.omega, f0, z0);
}

namespace {

ChainTrajectory run_single_chain(const BlockKernelMatrix& K, const VectorXd& mu,
                                 const OveTransform& A, const GibbsConfig& cfg, int chain) {
    RngStream rng(cfg.master_seed, static_cast<std::uint64_t>(chain));
    const Eigen::Index d = K.dim();

    VectorXd omega(d);
    for (Eigen::Index j = 0; j < d; ++j) omega[j] = sample_pg1(0.0, rng);
    VectorXd f = K.sample_prior(mu, rng);

    ChainTrajectory traj;
    traj.states.reserve(cfg.steps);
    for (int t = 1; t <= cfg.steps; ++t) {
        const VectorXd psi = A.apply(f);
        AugmentationState state = sample_omega_conditional(psi, rng);
        f = cfg.use_efficient_sampler
                ? sample_f_conditional_efficient(K, mu, A, state, rng)
                : sample_f_conditional_naive(K, mu, A, state, rng);
        traj.states.push_back(ChainState{f, std::move(state.omega), t});
    }
    return traj;
}

}  // namespace

std::vector<ChainTrajectory> run_gibbs(const BlockKernelMatrix& K, const VectorXd& mu,
                                       const OveTransform& A, const GibbsConfig& cfg) {
    if (cfg.chains < 1 || cfg.steps < 1)
        throw std::invalid_argument("gibbs config needs chains >= 1 and steps >= 1");

    std::vector<ChainTrajectory> out(cfg.chains);
    if (cfg.parallel && cfg.chains > 1) {
        std::vector<std::future<ChainTrajectory>> futures;
        futures.reserve(cfg.chains);
        for (int m = 0; m < cfg.chains; ++m)
            futures.push_back(std::async(std::launch::async, [&, m] {
                return run_single_chain(K, mu, A, cfg, m);
            }));
        for (int m = 0; m < cfg.chains; ++m) {
            try {
                out[m] = futures[m].get();
            } catch (const std::exception& e) {
                throw std::runtime_error("chain " + std::to_string(m) + ": " + e.what());
            }
        }
    } else {
        for (int m = 0; m < cfg.chains; ++m) {
            try {
                out[m] = run_single_chain(K, mu, A, cfg, m);
            } catch (const std::exception& e) {
                throw std::runtime_error("chain " + std::to_string(m) + ": " + e.what());
            }
        }
    }
    return out;
}

std::vector<ChainTrajectory> run_gibbs(const LabeledDesignMatrix& data,
                                       const KernelSpec& spec, const GibbsConfig& cfg) {
    const BlockKernelMatrix K = build_block_kernel(spec, data.X, data.num_classes());
    const OveTransform A = build_ove_transform(data.labels);
    const VectorXd mu = VectorXd::Constant(K.dim(), spec.mean_const);
    return run_gibbs(K, mu, A, cfg);
}

std::vector<VectorXd> ess_sample(const BlockKernelMatrix& K, const VectorXd& mu,
                                 const std::function<double(const VectorXd&)>& log_lik,
                                 int iterations, RngStream& rng) {
    if (iterations < 1) throw std::invalid_argument("ess needs at least one iteration");
    const VectorXd zero = VectorXd::Zero(K.dim());
    VectorXd g = K.sample_prior(zero, rng);

    std::vector<VectorXd> samples;
    samples.reserve(iterations);
    double cur_ll = log_lik(mu + g);
    for (int it = 0; it < iterations; ++it) {
        const VectorXd nu = K.sample_prior(zero, rng);
        const double log_y = cur_ll + std::log(rng.uniform());
        double theta = rng.uniform() * 2.0 * std::numbers::pi;
        double lo = theta - 2.0 * std::numbers::pi;
        double hi = theta;
        for (;;) {
            const VectorXd prop = g * std::cos(theta) + nu * std::sin(theta);
            const double ll = log_lik(mu + prop);
            if (ll > log_y) {
                g = prop;
                cur_ll = ll;
                break;
            }
            if (theta < 0.0) lo = theta; else hi = theta;
            theta = lo + rng.uniform() * (hi - lo);
        }
        samples.push_back(mu + g);
    }
    return samples;
}

double stacked_log_lik(LikKind kind, const LabeledDesignMatrix& data, const VectorXd& f) {
    const int n = data.n();
    const int c = data.num_classes();
    double acc = 0.0;
    VectorXd fi(c);
    for (int i = 0; i < n; ++i) {
        for (int cc = 0; cc < c; ++cc) fi[cc] = f[stacked_index(cc, i, n)];
        acc += log_lik(kind, fi, data.labels.class_of(i));
    }
    return acc;
}

std::vector<VectorXd> ess_oracle(const LabeledDesignMatrix& data, const KernelSpec& spec,
                                 LikKind kind, int iterations, RngStream& rng) {
    const BlockKernelMatrix K = build_block_kernel(spec, data.X, data.num_classes());
    const VectorXd mu = VectorXd::Constant(K.dim(), spec.mean_const);
    return ess_sample(
        K, mu, [&](const VectorXd& f) { return stacked_log_lik(kind, data, f); },
        iterations, rng);
}

}  // namespace ovepg
