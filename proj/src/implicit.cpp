#include "pathint/implicit.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "pathint/parallel.hpp"
#include "pathint/rng.hpp"

namespace pathint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kColumnChunk = 1024;

double nan_to_inf(double v) { return std::isnan(v) ? kInf : v; }

}  // namespace

PathFunctional::PathFunctional(const AugmentedSystem& aug, const TimeGrid& grid,
                               Eigen::VectorXd x_start, double y_start)
    : aug_(&aug), grid_(grid), x_start_(std::move(x_start)), y_start_(y_start) {
    validate_grid(grid_);
    n_ = aug.base().n;
    steps_ = grid_.steps_remaining();
    dt_ = grid_.dt();
    if (x_start_.size() != n_) throw DimensionMismatch("start state has wrong length");

    const Eigen::MatrixXd& sigma = aug.base().sigma;
    Eigen::MatrixXd step_cov = sigma * sigma.transpose() * dt_;
    Eigen::LLT<Eigen::MatrixXd> llt(step_cov);
    if (llt.info() != Eigen::Success) throw SingularNoise("sigma sigma' is not invertible");
    Eigen::VectorXd ldiag = Eigen::MatrixXd(llt.matrixL()).diagonal();
    if (ldiag.minCoeff() * ldiag.minCoeff() <= 1e-14 * step_cov.norm())
        throw SingularNoise("sigma sigma' is numerically singular");
    step_cov_inv_ = llt.solve(Eigen::MatrixXd::Identity(n_, n_));
    log_det_step_cov_ = 2.0 * ldiag.array().log().sum();

    c_table_.resize(steps_);
    for (int i = 1; i <= steps_; ++i) {
        c_table_[i - 1] = aug.cost().c(grid_.time(grid_.j + i));
        if (c_table_[i - 1].size() != n_) throw DimensionMismatch("c(s) has wrong length");
    }
}

double PathFunctional::value(const Eigen::VectorXd& flat) const {
    if (flat.size() != dim()) throw DimensionMismatch("path vector has wrong length");
    const auto& sde = aug_->base();
    const auto& cost = aug_->cost();
    double y = y_start_;
    double quad = 0.0;
    Eigen::VectorXd prev = x_start_;
    for (int i = 1; i <= steps_; ++i) {
        double t_prev = grid_.time(grid_.j + i - 1);
        double t_cur = grid_.time(grid_.j + i);
        Eigen::VectorXd xi = flat.segment((i - 1) * n_, n_);
        Eigen::VectorXd q = xi - prev - sde.f(t_prev, prev) * dt_;
        quad += q.dot(step_cov_inv_ * q);
        y += cost.V(t_cur, xi) * dt_ + c_table_[i - 1].dot(xi - prev);
        prev = xi;
    }
    return nan_to_inf(cost.Phi(prev, y) / lambda() + 0.5 * quad);
}

Eigen::ArrayXd PathFunctional::values_batch(const Eigen::MatrixXd& flats) const {
    const auto& sde = aug_->base();
    const auto& cost = aug_->cost();
    const int q_count = static_cast<int>(flats.cols());
    if (flats.rows() != dim()) throw DimensionMismatch("path matrix has wrong row count");

    if (!(sde.f_batch && cost.V_batch && cost.Phi_batch)) {
        Eigen::ArrayXd out(q_count);
        for (int q = 0; q < q_count; ++q) out(q) = value(flats.col(q));
        return out;
    }

    Eigen::ArrayXd quad = Eigen::ArrayXd::Zero(q_count);
    Eigen::ArrayXd y = Eigen::ArrayXd::Constant(q_count, y_start_);
    Eigen::MatrixXd prev = x_start_.replicate(1, q_count);
    Eigen::MatrixXd qi(n_, q_count), w(n_, q_count);
    for (int i = 1; i <= steps_; ++i) {
        double t_prev = grid_.time(grid_.j + i - 1);
        double t_cur = grid_.time(grid_.j + i);
        const auto block = flats.middleRows((i - 1) * n_, n_);
        qi = block - prev - sde.f_batch(t_prev, prev) * dt_;
        w.noalias() = step_cov_inv_ * qi;
        quad += (qi.array() * w.array()).colwise().sum().transpose();
        // c(t) dx accumulated dimension by dimension so the rounding
        // sequence matches the scalar path.
        Eigen::ArrayXd cdx = Eigen::ArrayXd::Zero(q_count);
        for (int k = 0; k < n_; ++k)
            cdx += c_table_[i - 1](k) * (block.row(k) - prev.row(k)).array().transpose();
        y += cost.V_batch(t_cur, block).array() * dt_ + cdx;
        prev = block;
    }
    Eigen::ArrayXd out = cost.Phi_batch(prev, y).array() / lambda() + 0.5 * quad;
    for (int q = 0; q < q_count; ++q) out(q) = nan_to_inf(out(q));
    return out;
}

bool PathFunctional::has_analytic_gradient() const {
    return static_cast<bool>(aug_->base().df_dx) && static_cast<bool>(aug_->cost().dV_dx) &&
           static_cast<bool>(aug_->cost().dPhi);
}

bool PathFunctional::has_structured_hessian() const {
    return has_analytic_gradient() && aug_->base().drift_affine &&
           aug_->cost().phi_additive_in_y && static_cast<bool>(aug_->cost().d2V_dx2) &&
           static_cast<bool>(aug_->cost().d2Phi);
}

Eigen::VectorXd PathFunctional::gradient(const Eigen::VectorXd& flat) const {
    return has_analytic_gradient() ? analytic_gradient(flat) : fd_gradient(flat);
}

Eigen::VectorXd PathFunctional::analytic_gradient(const Eigen::VectorXd& flat) const {
    const auto& sde = aug_->base();
    const auto& cost = aug_->cost();
    std::vector<Eigen::VectorXd> aq(steps_ + 1);  // (sigma sigma' dt)^-1 q_i
    std::vector<Eigen::VectorXd> state(steps_ + 1);
    state[0] = x_start_;
    double y = y_start_;
    for (int i = 1; i <= steps_; ++i) {
        double t_prev = grid_.time(grid_.j + i - 1);
        double t_cur = grid_.time(grid_.j + i);
        state[i] = flat.segment((i - 1) * n_, n_);
        Eigen::VectorXd q = state[i] - state[i - 1] - sde.f(t_prev, state[i - 1]) * dt_;
        aq[i] = step_cov_inv_ * q;
        y += cost.V(t_cur, state[i]) * dt_ + c_table_[i - 1].dot(state[i] - state[i - 1]);
    }
    PhiGradient pg = cost.dPhi(state[steps_], y);

    Eigen::VectorXd g(dim());
    for (int k = 1; k <= steps_; ++k) {
        double t_k = grid_.time(grid_.j + k);
        Eigen::VectorXd gk = aq[k];
        if (k < steps_) {
            Eigen::MatrixXd b =
                Eigen::MatrixXd::Identity(n_, n_) + dt_ * sde.df_dx(t_k, state[k]);
            gk.noalias() -= b.transpose() * aq[k + 1];
        }
        Eigen::VectorXd dy_dxk = dt_ * cost.dV_dx(t_k, state[k]) + c_table_[k - 1].transpose();
        if (k < steps_) dy_dxk -= c_table_[k].transpose();
        gk += (pg.dy / lambda()) * dy_dxk;
        if (k == steps_) gk += pg.dx / lambda();
        g.segment((k - 1) * n_, n_) = gk;
    }
    return g;
}

Eigen::VectorXd PathFunctional::fd_gradient(const Eigen::VectorXd& flat) const {
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    Eigen::VectorXd g(dim());
    Eigen::VectorXd x = flat;
    for (int k = 0; k < dim(); ++k) {
        double h = sqrt_eps * (1.0 + std::abs(x(k)));
        double orig = x(k);
        x(k) = orig + h;
        double fp = value(x);
        x(k) = orig - h;
        double fm = value(x);
        x(k) = orig;
        g(k) = (fp - fm) / (2.0 * h);
    }
    return g;
}

BlockTridiag PathFunctional::hessian_structured(const Eigen::VectorXd& flat) const {
    const auto& sde = aug_->base();
    const auto& cost = aug_->cost();
    std::vector<Eigen::VectorXd> state(steps_ + 1);
    state[0] = x_start_;
    double y = y_start_;
    for (int i = 1; i <= steps_; ++i) {
        double t_cur = grid_.time(grid_.j + i);
        state[i] = flat.segment((i - 1) * n_, n_);
        y += cost.V(t_cur, state[i]) * dt_ + c_table_[i - 1].dot(state[i] - state[i - 1]);
    }
    PhiGradient pg = cost.dPhi(state[steps_], y);
    PhiHessian ph = cost.d2Phi(state[steps_], y);
    const double beta = pg.dy / lambda();

    BlockTridiag h(steps_, n_);
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n_, n_);
    for (int k = 1; k <= steps_; ++k) {
        double t_k = grid_.time(grid_.j + k);
        Eigen::MatrixXd dk = step_cov_inv_;
        if (k < steps_) {
            Eigen::MatrixXd b = eye + dt_ * sde.df_dx(t_k, state[k]);
            dk.noalias() += b.transpose() * step_cov_inv_ * b;
            h.sub(k - 1) = -step_cov_inv_ * b;
        }
        dk += (beta * dt_) * cost.d2V_dx2(t_k, state[k]);
        if (k == steps_) dk += ph.dxx / lambda();
        h.diag(k - 1) = 0.5 * (dk + dk.transpose());
    }
    return h;
}

Eigen::MatrixXd PathFunctional::hessian_dense(const Eigen::VectorXd& flat) const {
    if (has_structured_hessian()) return hessian_structured(flat).to_dense();
    const double h_scale = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd h(dim(), dim());
    Eigen::VectorXd x = flat;
    for (int k = 0; k < dim(); ++k) {
        double step = h_scale * (1.0 + std::abs(x(k)));
        double orig = x(k);
        x(k) = orig + step;
        Eigen::VectorXd gp = gradient(x);
        x(k) = orig - step;
        Eigen::VectorXd gm = gradient(x);
        x(k) = orig;
        h.col(k) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

Eigen::VectorXd PathFunctional::noise_free_path() const {
    const auto& sde = aug_->base();
    Eigen::VectorXd flat(dim());
    Eigen::VectorXd prev = x_start_;
    for (int i = 1; i <= steps_; ++i) {
        double t_prev = grid_.time(grid_.j + i - 1);
        Eigen::VectorXd next = prev + sde.f(t_prev, prev) * dt_;
        if (!next.allFinite()) throw NonFiniteValue("drift returned a non-finite value");
        flat.segment((i - 1) * n_, n_) = next;
        prev = next;
    }
    return flat;
}

double eval_F(const PathVector& path, const AugmentedSystem& aug) {
    PathFunctional fp(aug, path.grid, path.x_start, path.y_start);
    return fp.value(path.flat);
}

namespace {

// Newton direction with escalating diagonal damping when the Hessian is
// not positive definite at the current iterate.
Eigen::VectorXd newton_direction(const PathFunctional& fp, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& g, bool structured) {
    if (structured) {
        BlockTridiag h = fp.hessian_structured(x);
        double scale = 0.0;
        for (int k = 0; k < h.blocks(); ++k)
            scale = std::max(scale, h.diag(k).diagonal().cwiseAbs().maxCoeff());
        double tau = 0.0;
        for (int attempt = 0; attempt < 20; ++attempt) {
            BlockTridiag damped = h;
            if (tau > 0.0)
                for (int k = 0; k < damped.blocks(); ++k)
                    damped.diag(k) += tau * Eigen::MatrixXd::Identity(h.block_size(),
                                                                      h.block_size());
            BlockTridiagCholesky chol;
            if (chol.compute(damped)) return -chol.solve(g);
            tau = (tau == 0.0) ? 1e-8 * std::max(scale, 1.0) : tau * 10.0;
        }
    } else {
        Eigen::MatrixXd h = fp.hessian_dense(x);
        double scale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1.0);
        double tau = 0.0;
        for (int attempt = 0; attempt < 20; ++attempt) {
            Eigen::MatrixXd damped = h;
            if (tau > 0.0) damped.diagonal().array() += tau;
            Eigen::LLT<Eigen::MatrixXd> llt(damped);
            if (llt.info() == Eigen::Success) return -llt.solve(g);
            tau = (tau == 0.0) ? 1e-8 * scale : tau * 10.0;
        }
    }
    return -g;  // steepest descent as a last resort
}

}  // namespace

ImplicitMap minimize_F(const AugmentedSystem& aug, const TimeGrid& grid,
                       const Eigen::VectorXd& x_start, double y_start,
                       const MinimizeOptions& options) {
    PathFunctional fp(aug, grid, x_start, y_start);
    const bool structured = fp.has_structured_hessian();

    Eigen::VectorXd x;
    if (options.init) {
        if (options.init->size() != fp.dim())
            throw DimensionMismatch("initial path has wrong length");
        x = *options.init;
    } else {
        x = fp.noise_free_path();
    }
    double fx = fp.value(x);
    if (!std::isfinite(fx)) {
        x = fp.noise_free_path();
        fx = fp.value(x);
    }

    ImplicitMap map;
    map.grid = grid;
    map.x_start = x_start;
    map.y_start = y_start;
    map.structured = structured;

    int iterations = 0;
    bool converged = false;
    for (;;) {
        Eigen::VectorXd g = fp.gradient(x);
        if (!g.allFinite()) break;
        if (g.cwiseAbs().maxCoeff() <= options.grad_tol) {
            converged = true;
            break;
        }
        if (iterations >= options.max_iter) break;
        ++iterations;

        Eigen::VectorXd p = newton_direction(fp, x, g, structured);
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            p = -g;
            slope = -g.squaredNorm();
        }
        double t = 1.0;
        bool moved = false;
        while (t >= 1e-20) {
            double fnew = fp.value(x + t * p);
            if (fnew <= fx + options.armijo_c * t * slope) {
                x += t * p;
                fx = fnew;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }

    map.mu = x;
    map.zeta = fx;
    map.converged = converged;
    map.iterations = iterations;

    if (structured) {
        map.h_structured = fp.hessian_structured(x);
        if (!map.chol_structured.compute(map.h_structured))
            throw IndefiniteHessian("Hessian of F is not positive definite at the minimizer");
        map.log_det_factor = map.chol_structured.log_det_l();
    } else {
        map.h_dense = fp.hessian_dense(x);
        Eigen::LLT<Eigen::MatrixXd> llt(map.h_dense);
        if (llt.info() != Eigen::Success)
            throw IndefiniteHessian("Hessian of F is not positive definite at the minimizer");
        map.l_dense = llt.matrixL();
        if (map.l_dense.diagonal().minCoeff() <= 0.0)
            throw IndefiniteHessian("Hessian of F is not positive definite at the minimizer");
        map.log_det_factor = map.l_dense.diagonal().array().log().sum();
    }
    return map;
}

Eigen::MatrixXd ImplicitMap::hessian() const {
    return structured ? h_structured.to_dense() : h_dense;
}

Eigen::MatrixXd ImplicitMap::factor() const {
    return structured ? chol_structured.factor_dense() : l_dense;
}

Eigen::VectorXd ImplicitMap::solve_factor_transposed(const Eigen::VectorXd& xi) const {
    if (structured) {
        Eigen::MatrixXd col = xi;
        chol_structured.solve_transposed_in_place(col);
        return col.col(0);
    }
    return l_dense.transpose().triangularView<Eigen::Upper>().solve(xi);
}

void ImplicitMap::solve_factor_transposed_in_place(Eigen::Ref<Eigen::MatrixXd> block) const {
    if (structured) {
        chol_structured.solve_transposed_in_place(block);
    } else {
        l_dense.transpose().triangularView<Eigen::Upper>().solveInPlace(block);
    }
}

PathVector map_sample(const ImplicitMap& map, const Eigen::VectorXd& xi) {
    if (!map.converged) throw Error("implicit map did not converge; cannot map samples");
    if (xi.size() != map.dim()) throw DimensionMismatch("reference sample has wrong length");
    PathVector path;
    path.grid = map.grid;
    path.x_start = map.x_start;
    path.y_start = map.y_start;
    path.flat = map.mu + map.solve_factor_transposed(xi);
    return path;
}

Eigen::MatrixXd draw_reference_samples(int dim, int Q, std::uint64_t seed) {
    Eigen::MatrixXd xi(dim, Q);
    parallel_for_chunks(Q, 256, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            GaussianStream stream(stream_seed(seed, q));
            for (int r = 0; r < dim; ++r) xi(r, q) = stream.next();
        }
    });
    return xi;
}

PsiEstimate estimate_psi_implicit_given(const AugmentedSystem& aug, const ImplicitMap& map,
                                        const Eigen::MatrixXd& xi_columns) {
    if (!map.converged) throw Error("implicit map did not converge; cannot estimate psi");
    PathFunctional fp(aug, map.grid, map.x_start, map.y_start);
    if (xi_columns.rows() != fp.dim())
        throw DimensionMismatch("reference samples have wrong dimension");
    const int q_count = static_cast<int>(xi_columns.cols());
    if (q_count < 1) throw Error("sample count must be at least 1");

    Eigen::ArrayXd logw(q_count);
    parallel_for_chunks(q_count, kColumnChunk, [&](std::size_t b, std::size_t e) {
        const int width = static_cast<int>(e - b);
        Eigen::MatrixXd x = xi_columns.middleCols(b, width);
        Eigen::ArrayXd half_norm =
            0.5 * x.colwise().squaredNorm().transpose().array();
        map.solve_factor_transposed_in_place(x);
        x.colwise() += map.mu;
        // -zeta + Ftilde(x) - F(x) with Ftilde(x(xi)) - zeta = xi'xi/2
        logw.segment(b, width) = half_norm - fp.values_batch(x);
    });

    const double log_pref = -0.5 * fp.steps() * fp.log_det_step_cov() - map.log_det_factor;

    PsiEstimate est;
    double a = logw.maxCoeff();
    if (!std::isfinite(a)) {
        est.log_psi = (a > 0) ? kInf : -kInf;
        est.psi = std::exp(est.log_psi);
        return est;
    }
    double s1 = 0.0;
    for (int q = 0; q < q_count; ++q) s1 += std::exp(logw(q) - a);
    double mean_shifted = s1 / q_count;
    est.log_psi = log_pref + a + std::log(mean_shifted);
    est.psi = std::exp(est.log_psi);
    double wmin = logw.minCoeff();
    est.log_weight_spread = a - wmin;
    if (q_count > 1) {
        double ss = 0.0;
        for (int q = 0; q < q_count; ++q) {
            double d = std::exp(logw(q) - a) - mean_shifted;
            ss += d * d;
        }
        double var_shifted = ss / (q_count - 1);
        est.rel_stderr = std::sqrt(var_shifted / q_count) / mean_shifted;
        est.stderr_ = est.psi * est.rel_stderr;
    }
    return est;
}

PsiEstimate estimate_psi_implicit(const AugmentedSystem& aug, const ImplicitMap& map,
                                  const TimeGrid& grid, int Q, std::uint64_t seed) {
    if (grid.T != map.grid.T || grid.M != map.grid.M || grid.j != map.grid.j)
        throw Error("time grid does not match the one the map was built on");
    Eigen::MatrixXd xi = draw_reference_samples(map.dim(), Q, seed);
    return estimate_psi_implicit_given(aug, map, xi);
}

}  // namespace pathint
