#include "pathint/sampler.hpp"

#include <cmath>

#include "pathint/parallel.hpp"
#include "pathint/rng.hpp"

namespace pathint {

namespace {

constexpr std::size_t kSampleChunk = 256;

// y series along one path, columns aligned with t_j..t_M. c_table[i-1]
// holds c(t_{j+i}); sharing the table keeps every recomputation of the
// recursion bit-identical.
Eigen::VectorXd y_series(double y_start, const Eigen::MatrixXd& x_path,
                         const GeneralizedCost& cost, const TimeGrid& grid,
                         const std::vector<Eigen::RowVectorXd>& c_table) {
    const int steps = static_cast<int>(x_path.cols()) - 1;
    const double dt = grid.dt();
    Eigen::VectorXd y(steps + 1);
    y(0) = y_start;
    for (int i = 1; i <= steps; ++i) {
        double t = grid.time(grid.j + i);
        double v = cost.V(t, x_path.col(i));
        double dy = v * dt + c_table[i - 1].dot(x_path.col(i) - x_path.col(i - 1));
        if (!std::isfinite(dy)) throw NonFiniteValue("running cost produced a non-finite value");
        y(i) = y(i - 1) + dy;
    }
    return y;
}

std::vector<Eigen::RowVectorXd> c_table_for(const GeneralizedCost& cost, const TimeGrid& grid) {
    std::vector<Eigen::RowVectorXd> table(grid.steps_remaining());
    for (int i = 1; i <= grid.steps_remaining(); ++i) table[i - 1] = cost.c(grid.time(grid.j + i));
    return table;
}

}  // namespace

void validate_grid(const TimeGrid& grid) {
    if (grid.M < 1) throw Error("time grid needs at least one step");
    if (!(grid.T > 0.0)) throw Error("time grid horizon must be positive");
    if (grid.j < 0 || grid.j >= grid.M) throw Error("time grid index out of range");
}

std::vector<Eigen::MatrixXd> draw_increments(const TimeGrid& grid, int n, int Q,
                                             std::uint64_t seed) {
    validate_grid(grid);
    const int steps = grid.steps_remaining();
    std::vector<Eigen::MatrixXd> increments(Q);
    parallel_for_chunks(Q, kSampleChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            GaussianStream stream(stream_seed(seed, q));
            Eigen::MatrixXd z(n, steps);
            for (int i = 0; i < steps; ++i)
                for (int k = 0; k < n; ++k) z(k, i) = stream.next();
            increments[q] = std::move(z);
        }
    });
    return increments;
}

PathBundle propagate_paths(const AugmentedSystem& aug, const TimeGrid& grid,
                           const Eigen::VectorXd& x_start, double y_start,
                           const std::vector<Eigen::MatrixXd>& increments) {
    validate_grid(grid);
    const ControlledSde& sde = aug.base();
    if (x_start.size() != sde.n) throw DimensionMismatch("start state has wrong length");
    if (!x_start.allFinite() || !std::isfinite(y_start))
        throw NonFiniteValue("start state is non-finite");

    const int steps = grid.steps_remaining();
    const int Q = static_cast<int>(increments.size());
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const auto c_table = c_table_for(aug.cost(), grid);

    PathBundle bundle;
    bundle.grid = grid;
    bundle.x_start = x_start;
    bundle.y_start = y_start;
    bundle.x_paths.resize(Q);
    bundle.y_paths.resize(Q);
    bundle.increments = increments;

    parallel_for_chunks(Q, kSampleChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            const Eigen::MatrixXd& z = increments[q];
            Eigen::MatrixXd path(sde.n, steps + 1);
            path.col(0) = x_start;
            for (int i = 1; i <= steps; ++i) {
                double s_prev = grid.time(grid.j + i - 1);
                Eigen::VectorXd fx = sde.f(s_prev, path.col(i - 1));
                if (!fx.allFinite()) throw NonFiniteValue("drift returned a non-finite value");
                path.col(i) =
                    path.col(i - 1) + fx * dt + sde.sigma * (sqrt_dt * z.col(i - 1));
            }
            bundle.y_paths[q] = y_series(y_start, path, aug.cost(), grid, c_table);
            bundle.x_paths[q] = std::move(path);
        }
    });
    return bundle;
}

PathBundle sample_paths(const AugmentedSystem& aug, const TimeGrid& grid,
                        const Eigen::VectorXd& x_start, double y_start, int Q,
                        std::uint64_t seed) {
    if (Q < 1) throw Error("sample count must be at least 1");
    return propagate_paths(aug, grid, x_start, y_start,
                           draw_increments(grid, aug.base().n, Q, seed));
}

double update_y(double y_start, const Eigen::MatrixXd& x_path, const GeneralizedCost& cost,
                const TimeGrid& grid) {
    if (static_cast<int>(x_path.cols()) != grid.steps_remaining() + 1)
        throw DimensionMismatch("path has wrong number of columns for the grid");
    const auto c_table = c_table_for(cost, grid);
    Eigen::VectorXd y = y_series(y_start, x_path, cost, grid, c_table);
    return y(y.size() - 1);
}

PsiEstimate estimate_psi_standard(const PathBundle& bundle, const GeneralizedCost& cost,
                                  double lambda) {
    const int Q = bundle.sample_count();
    if (Q < 1) throw Error("bundle is empty");

    Eigen::VectorXd logw(Q);
    parallel_for_chunks(Q, kSampleChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            const auto& path = bundle.x_paths[q];
            double y_T = bundle.y_paths[q](bundle.y_paths[q].size() - 1);
            double phi = cost.Phi(path.col(path.cols() - 1), y_T);
            if (std::isnan(phi)) throw NonFiniteValue("terminal cost returned NaN");
            logw(q) = -phi / lambda;
        }
    });

    PsiEstimate est;
    double a = logw.maxCoeff();
    if (!std::isfinite(a)) {
        // Every weight underflowed (or Phi was -inf); report in log space.
        est.log_psi = a;
        est.psi = std::exp(a);
        return est;
    }
    double s1 = 0.0;
    for (int q = 0; q < Q; ++q) s1 += std::exp(logw(q) - a);
    double mean_shifted = s1 / Q;
    est.log_psi = a + std::log(mean_shifted);
    est.psi = std::exp(est.log_psi);
    est.log_weight_spread = a - logw.minCoeff();
    if (Q > 1) {
        double ss = 0.0;
        for (int q = 0; q < Q; ++q) {
            double d = std::exp(logw(q) - a) - mean_shifted;
            ss += d * d;
        }
        double var_shifted = ss / (Q - 1);
        est.rel_stderr = std::sqrt(var_shifted / Q) / mean_shifted;
        est.stderr_ = est.psi * est.rel_stderr;
    }
    return est;
}

}  // namespace pathint
