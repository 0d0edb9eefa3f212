#include "pathint/augment.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <utility>

namespace pathint {

AugmentedSystem::AugmentedSystem(ControlledSde sde, GeneralizedCost cost, double compat_tol)
    : sde_(std::move(sde)), cost_(std::move(cost)) {
    compat_ = validate_lambda(sde_, cost_, compat_tol);
}

Eigen::MatrixXd AugmentedSystem::Lambda(double s) const {
    Eigen::MatrixXd lam(sde_.n + 1, sde_.n);
    lam.topRows(sde_.n) = Eigen::MatrixXd::Identity(sde_.n, sde_.n);
    Eigen::RowVectorXd row = cost_.c(s);
    if (row.size() != sde_.n) throw DimensionMismatch("c(s) has wrong length");
    lam.bottomRows(1) = row;
    return lam;
}

Eigen::MatrixXd AugmentedSystem::sigma_hat(double s) const { return Lambda(s) * sde_.sigma; }

Eigen::MatrixXd AugmentedSystem::K_hat(double s) const { return Lambda(s) * sde_.K; }

Eigen::VectorXd AugmentedSystem::augmented_drift(double s, const Eigen::VectorXd& x) const {
    Eigen::VectorXd fx = sde_.f(s, x);
    double v = cost_.V(s, x);
    Eigen::RowVectorXd row = cost_.c(s);
    Eigen::VectorXd out(sde_.n + 1);
    out.head(sde_.n) = fx;
    out(sde_.n) = v + row.dot(fx);
    if (!out.allFinite()) throw NonFiniteValue("augmented drift is non-finite");
    return out;
}

Eigen::MatrixXd AugmentedSystem::augmented_diffusion(double s) const { return sigma_hat(s); }

double check_augmented_compatibility(const AugmentedSystem& aug,
                                     const std::vector<double>& sample_times, double lambda) {
    Eigen::LLT<Eigen::MatrixXd> llt(aug.cost().R);
    double worst = 0.0;
    for (double s : sample_times) {
        Eigen::MatrixXd sh = aug.sigma_hat(s);
        Eigen::MatrixXd kh = aug.K_hat(s);
        Eigen::MatrixXd lhs = sh * sh.transpose();
        Eigen::MatrixXd rhs = lambda * kh * llt.solve(kh.transpose());
        double denom = std::max(lhs.norm(), rhs.norm());
        if (denom == 0.0) continue;
        worst = std::max(worst, (lhs - rhs).norm() / denom);
    }
    return worst;
}

double check_augmented_compatibility(const AugmentedSystem& aug,
                                     const std::vector<double>& sample_times) {
    return check_augmented_compatibility(aug, sample_times, aug.lambda());
}

}  // namespace pathint
