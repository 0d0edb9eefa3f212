#ifndef PATHINT_AUGMENT_HPP
#define PATHINT_AUGMENT_HPP

#include <vector>

#include "pathint/model.hpp"

namespace pathint {

// The (x, y) system obtained by adjoining the accumulated running cost
//   y_t = int V ds + int c dx
// as an extra state. Lambda(t) stacks the identity over the row c(t);
// sigma_hat = Lambda sigma and K_hat = Lambda K inherit the compatibility
// condition with the same lambda, which is what makes the log transform
// work for the augmented problem.
//
// Immutable after construction; all member functions are pure.
class AugmentedSystem {
public:
    AugmentedSystem(ControlledSde sde, GeneralizedCost cost, double compat_tol = 1e-8);

    const ControlledSde& base() const { return sde_; }
    const GeneralizedCost& cost() const { return cost_; }
    double lambda() const { return compat_.lambda; }
    const CompatibilityResult& compatibility() const { return compat_; }
    int n() const { return sde_.n; }
    int m() const { return sde_.m; }

    // (n+1) x n block matrix [I; c(s)].
    Eigen::MatrixXd Lambda(double s) const;
    // Lambda(s) * sigma.
    Eigen::MatrixXd sigma_hat(double s) const;
    // Lambda(s) * K.
    Eigen::MatrixXd K_hat(double s) const;

    // Drift of the uncontrolled augmented dynamics:
    //   [ f(s,x) ; V(s,x) + c(s) f(s,x) ].
    // Throws NonFiniteValue if a user callable returns a non-finite value.
    Eigen::VectorXd augmented_drift(double s, const Eigen::VectorXd& x) const;

    // Diffusion of the augmented dynamics, sigma_hat(s).
    Eigen::MatrixXd augmented_diffusion(double s) const;

private:
    ControlledSde sde_;
    GeneralizedCost cost_;
    CompatibilityResult compat_;
};

// Max over sample_times of the relative compatibility residual
//   || sigma_hat sigma_hat' - lambda K_hat R^-1 K_hat' ||_F
// normalized by the larger of the two term norms. Zero (to rounding)
// whenever the base condition holds.
double check_augmented_compatibility(const AugmentedSystem& aug,
                                     const std::vector<double>& sample_times);

// Same check with an explicit lambda (for diagnosing a perturbed constant).
double check_augmented_compatibility(const AugmentedSystem& aug,
                                     const std::vector<double>& sample_times, double lambda);

}  // namespace pathint

#endif
