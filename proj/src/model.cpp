#include "pathint/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace pathint {

void validate_sde(const ControlledSde& sde) {
    if (sde.n <= 0 || sde.m <= 0) throw DimensionMismatch("state and control dimensions must be positive");
    if (sde.K.rows() != sde.n || sde.K.cols() != sde.m)
        throw DimensionMismatch("K must be n x m");
    if (sde.sigma.rows() != sde.n || sde.sigma.cols() != sde.n)
        throw DimensionMismatch("sigma must be n x n");
    if (!(sde.T > 0.0)) throw Error("horizon T must be positive");
    if (!sde.f) throw Error("drift function f is not set");

    // sigma sigma' is symmetric PSD by construction; guard against NaN and
    // catastrophic asymmetry from non-finite entries.
    Eigen::MatrixXd gram = sde.sigma * sde.sigma.transpose();
    if (!gram.allFinite()) throw NonFiniteValue("sigma contains non-finite entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    double scale = gram.norm();
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(scale, 1.0))
        throw Error("sigma sigma' is not positive semidefinite");
}

void validate_cost(const GeneralizedCost& cost, int m) {
    if (cost.R.rows() != m || cost.R.cols() != m) throw DimensionMismatch("R must be m x m");
    if (!cost.R.allFinite()) throw NonFiniteValue("R contains non-finite entries");
    if (!cost.R.isApprox(cost.R.transpose(), 1e-12)) throw Error("R must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cost.R);
    if (llt.info() != Eigen::Success) throw Error("R must be positive definite");
    if (!cost.Phi || !cost.V || !cost.c) throw Error("Phi, V and c must all be set");
}

CompatibilityResult validate_lambda(const ControlledSde& sde, const GeneralizedCost& cost,
                                    double tol) {
    validate_sde(sde);
    validate_cost(cost, sde.m);

    Eigen::MatrixXd gram = sde.sigma * sde.sigma.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(cost.R);
    Eigen::MatrixXd g = sde.K * llt.solve(sde.K.transpose());  // K R^-1 K'

    double gg = g.squaredNorm();
    double gram_norm = gram.norm();
    if (gg == 0.0) throw IncompatibleNoise("K R^-1 K' vanishes; no lambda exists");

    CompatibilityResult result;
    result.lambda = (gram.array() * g.array()).sum() / gg;
    result.residual = (gram - result.lambda * g).norm() / gram_norm;
    if (!(result.lambda > 0.0))
        throw IncompatibleNoise("least-squares lambda is nonpositive");
    if (!(result.residual <= tol))
        throw IncompatibleNoise("sigma sigma' is not proportional to K R^-1 K' (residual " +
                                std::to_string(result.residual) + ")");
    return result;
}

Eigen::VectorXd drift(const ControlledSde& sde, double s, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& u) {
    if (x.size() != sde.n) throw DimensionMismatch("state vector has wrong length");
    if (u.size() != sde.m) throw DimensionMismatch("control vector has wrong length");
    Eigen::VectorXd fx = sde.f(s, x);
    if (fx.size() != sde.n) throw DimensionMismatch("drift callable returned wrong length");
    return fx + sde.K * u;
}

}  // namespace pathint
