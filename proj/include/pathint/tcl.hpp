#ifndef PATHINT_TCL_HPP
#define PATHINT_TCL_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "pathint/model.hpp"

namespace pathint {

// Aggregate thermostatically-controlled-load fleet: per type i, averaged
// indoor temperature dynamics
//   dTheta_i = [alpha_i (outdoor(t) - Theta_i) - kappa_i u_i / N_i] dt
//              + sigma_i dW_i,
// with u_i the total power drawn by type i. Units: hours, degrees C, kW,
// currency per kWh.
struct TclFleetConfig {
    std::vector<double> alpha;   // 1/hour, R_i / C_i
    std::vector<double> kappa;   // degC per kW per hour effective cooling gain
    std::vector<double> count;   // N_i, TCLs per type
    std::vector<double> sigma;   // degC/sqrt(hour) noise intensity
    double theta_low = 0.0;      // comfort band lower edge, degC
    double theta_high = 0.0;     // comfort band upper edge, degC
    double eta1 = 0.0;           // discomfort scale
    double eta2 = 0.0;           // discomfort steepness
    Eigen::MatrixXd R_weight;    // control cost matrix
    Eigen::VectorXd theta0;      // initial temperatures, degC
    double t_start = 0.0;        // window start, absolute hours
    double t_end = 0.0;          // window end, absolute hours

    int n() const { return static_cast<int>(alpha.size()); }
};

// Throws ConfigInvalid naming the offending field.
void validate_config(const TclFleetConfig& config);

// Paper setups: one type (band 19..22, eta1 = 2) and six types with
// increasing alpha (band 18..21.5, eta1 = 0.1/36).
TclFleetConfig tcl_single_config();
TclFleetConfig tcl_six_config();

struct ForecastSample {
    double t = 0.0;        // absolute hours
    double outdoor = 0.0;  // degC
    double price = 0.0;    // currency/kWh
};

// Piecewise-linear outdoor temperature and price forecast.
class ForecastSeries {
public:
    explicit ForecastSeries(std::vector<ForecastSample> samples);

    double outdoor_at(double t) const;  // CoverageError outside the samples
    double price_at(double t) const;
    double t_min() const { return samples_.front().t; }
    double t_max() const { return samples_.back().t; }
    const std::vector<ForecastSample>& samples() const { return samples_; }

private:
    std::pair<int, double> locate(double t) const;
    std::vector<ForecastSample> samples_;
};

// CSV with header "t_hours,outdoor_c,price_per_kwh". ParseError carries
// row/column diagnostics.
ForecastSeries load_forecast(std::istream& in);
ForecastSeries load_forecast(const std::string& path);

// SDE over the window [t_start, t_end] with time measured from t_start:
// f_i(s,x) = alpha_i (outdoor(t_start + s) - x_i), K = diag(-kappa_i/N_i),
// sigma = diag(sigma_i). Supplies analytic drift derivatives and batch
// evaluation.
ControlledSde build_tcl_sde(const TclFleetConfig& config, const ForecastSeries& forecast);

// Discomfort  eta1 (sum_i b_i)^2,
// b_i = exp(eta2 (x_i - theta_high)) + exp(eta2 (theta_low - x_i)).
// Switches to a log-domain form when the square would overflow.
double discomfort(const TclFleetConfig& config, const Eigen::VectorXd& x);

// Generalized cost that absorbs the linear balancing cost p(t) 1'u via
//   V(t,x) = discomfort(x) - p(t) 1'K^-1 f(t,x),
//   c(t)   = p(t) 1'K^-1,
//   Phi(x,y) = y,  R = config.R_weight,
// which is the rewriting that moves p(t) 1'u into the stochastic-integral
// cost channel (exact in expectation; the difference is a martingale).
GeneralizedCost build_generalized_cost(const TclFleetConfig& config,
                                       const ForecastSeries& forecast,
                                       const ControlledSde& sde);

}  // namespace pathint

#endif
