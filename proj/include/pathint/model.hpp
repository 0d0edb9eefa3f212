#ifndef PATHINT_MODEL_HPP
#define PATHINT_MODEL_HPP

#include <Eigen/Core>
#include <functional>

#include "pathint/errors.hpp"

namespace pathint {

// Controlled diffusion  dx = [f(t,x) + K u] dt + sigma dW  on [0,T].
//
// f must be pure: deterministic for fixed inputs, no observable side
// effects. Instances are immutable after construction and safe to share
// across threads.
struct ControlledSde {
    int n = 0;  // state dimension
    int m = 0;  // control dimension
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> f;
    Eigen::MatrixXd K;      // n x m control input matrix
    Eigen::MatrixXd sigma;  // n x n noise matrix
    double T = 0.0;         // horizon

    // Optional: Jacobian df/dx, enabling analytic derivatives of the path
    // functional. drift_affine declares that df/dx does not depend on x
    // (f affine in x), which makes the analytic Hessian exact.
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> df_dx;
    bool drift_affine = false;

    // Optional: column-wise evaluation of f on an n x Q matrix of states,
    // used by the samplers to amortize call overhead over many samples.
    // Must agree with f column by column.
    std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> f_batch;
};

struct PhiGradient {
    Eigen::VectorXd dx;
    double dy = 0.0;
};

struct PhiHessian {
    Eigen::MatrixXd dxx;
    Eigen::VectorXd dxy;
    double dyy = 0.0;
};

// Cost ingredients of the generalized objective
//   E[ Phi(x_T, y_T) + 1/2 int u' R u dt ],
//   y_t = int V(s, x_s) ds + int c(s) dx_s.
//
// Same purity and thread-safety contract as ControlledSde.
struct GeneralizedCost {
    std::function<double(const Eigen::VectorXd&, double)> Phi;  // terminal (x, y)
    std::function<double(double, const Eigen::VectorXd&)> V;    // running state cost
    std::function<Eigen::RowVectorXd(double)> c;                // 1 x n path-cost row
    Eigen::MatrixXd R;                                          // m x m, SPD

    // Optional analytic derivatives.
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> dV_dx;
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> d2V_dx2;
    std::function<PhiGradient(const Eigen::VectorXd&, double)> dPhi;
    std::function<PhiHessian(const Eigen::VectorXd&, double)> d2Phi;

    // Declares Phi(x,y) = Phi(x,0) + beta*y with constant beta. Keeps the
    // Hessian of the path functional block tridiagonal, which the
    // implicit sampler exploits.
    bool phi_additive_in_y = false;

    // Optional column-wise evaluation (states as columns).
    std::function<Eigen::ArrayXd(double, const Eigen::MatrixXd&)> V_batch;
    std::function<Eigen::ArrayXd(const Eigen::MatrixXd&, const Eigen::ArrayXd&)> Phi_batch;
};

// Result of checking the compatibility condition
//   sigma sigma' = lambda K R^-1 K'.
struct CompatibilityResult {
    double lambda = 0.0;    // least-squares fit
    double residual = 0.0;  // ||sigma sigma' - lambda K R^-1 K'||_F / ||sigma sigma'||_F
};

// Dimension and positivity checks on the SDE; throws DimensionMismatch or
// IncompatibleNoise-adjacent errors on violation.
void validate_sde(const ControlledSde& sde);

// R must be symmetric positive definite; throws Error otherwise.
void validate_cost(const GeneralizedCost& cost, int m);

// Fits lambda = <sigma sigma', G>_F / <G, G>_F with G = K R^-1 K' and
// checks the relative residual. Throws IncompatibleNoise if the residual
// exceeds tol, lambda <= 0, or G vanishes.
CompatibilityResult validate_lambda(const ControlledSde& sde, const GeneralizedCost& cost,
                                    double tol = 1e-8);

// Controlled drift f(s,x) + K u.
Eigen::VectorXd drift(const ControlledSde& sde, double s, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& u);

}  // namespace pathint

#endif
