#include "pathint/tcl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pathint {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigInvalid(field + ": " + what);
}

}  // namespace

void validate_config(const TclFleetConfig& config) {
    const std::size_t n = config.alpha.size();
    require(n >= 1, "alpha", "at least one TCL type required");
    require(config.kappa.size() == n, "kappa", "must have one entry per type");
    require(config.count.size() == n, "count", "must have one entry per type");
    require(config.sigma.size() == n, "sigma", "must have one entry per type");
    for (std::size_t i = 0; i < n; ++i) {
        require(config.alpha[i] > 0.0, "alpha", "entries must be positive");
        require(config.kappa[i] > 0.0, "kappa", "entries must be positive");
        require(config.count[i] > 0.0, "count", "entries must be positive");
        require(config.sigma[i] > 0.0, "sigma", "entries must be positive");
    }
    require(config.theta_low < config.theta_high, "comfort band", "lower edge must be below upper");
    require(config.eta1 > 0.0, "eta1", "must be positive");
    require(config.eta2 > 0.0, "eta2", "must be positive");
    require(config.R_weight.rows() == static_cast<int>(n) &&
                config.R_weight.cols() == static_cast<int>(n),
            "R_weight", "must be n x n");
    require(config.theta0.size() == static_cast<int>(n), "theta0", "must have one entry per type");
    require(config.t_end > config.t_start, "window", "t_end must exceed t_start");
}

TclFleetConfig tcl_single_config() {
    TclFleetConfig config;
    config.alpha = {0.4834};
    config.kappa = {2.5};
    config.count = {100.0};
    config.sigma = {0.1};
    config.theta_low = 19.0;
    config.theta_high = 22.0;
    config.eta1 = 2.0;
    config.eta2 = 5.0;
    config.R_weight = Eigen::MatrixXd::Constant(1, 1, 4.6875e-2);
    config.theta0 = Eigen::VectorXd::Constant(1, 23.0);
    config.t_start = 11.0;
    config.t_end = 16.0;
    return config;
}

TclFleetConfig tcl_six_config() {
    TclFleetConfig config;
    config.alpha = {0.4834, 0.6043, 0.7251, 0.8460, 0.9669, 1.0877};
    config.kappa = std::vector<double>(6, 2.5);
    config.count = std::vector<double>(6, 100.0);
    config.sigma = std::vector<double>(6, 0.1);
    config.theta_low = 18.0;
    config.theta_high = 21.5;
    config.eta1 = 0.1 / 36.0;
    config.eta2 = 5.0;
    config.R_weight = 4.6875e-2 * Eigen::MatrixXd::Identity(6, 6);
    config.theta0 = Eigen::VectorXd::Constant(6, 23.0);
    config.t_start = 11.0;
    config.t_end = 16.0;
    return config;
}

ForecastSeries::ForecastSeries(std::vector<ForecastSample> samples)
    : samples_(std::move(samples)) {
    if (samples_.size() < 2) throw ParseError("forecast needs at least two samples");
    for (std::size_t i = 1; i < samples_.size(); ++i)
        if (!(samples_[i].t > samples_[i - 1].t))
            throw ParseError("forecast times must be strictly increasing (row " +
                             std::to_string(i + 1) + ")");
}

std::pair<int, double> ForecastSeries::locate(double t) const {
    if (t < t_min() || t > t_max())
        throw CoverageError("forecast does not cover t = " + std::to_string(t) + " (range " +
                            std::to_string(t_min()) + ".." + std::to_string(t_max()) + ")");
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const ForecastSample& s) { return v < s.t; });
    int hi = static_cast<int>(it - samples_.begin());
    hi = std::clamp(hi, 1, static_cast<int>(samples_.size()) - 1);
    double frac = (t - samples_[hi - 1].t) / (samples_[hi].t - samples_[hi - 1].t);
    return {hi, frac};
}

double ForecastSeries::outdoor_at(double t) const {
    auto [hi, frac] = locate(t);
    return (1.0 - frac) * samples_[hi - 1].outdoor + frac * samples_[hi].outdoor;
}

double ForecastSeries::price_at(double t) const {
    auto [hi, frac] = locate(t);
    return (1.0 - frac) * samples_[hi - 1].price + frac * samples_[hi].price;
}

namespace {

double parse_field(const std::string& field, int row, int col) {
    try {
        std::size_t used = 0;
        double v = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
            ++used;
        if (used != field.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": not a number: '" + field + "'");
    }
}

std::string trimmed(std::string s) {
    auto notspace = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

}  // namespace

ForecastSeries load_forecast(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty forecast file");
    if (trimmed(line) != "t_hours,outdoor_c,price_per_kwh")
        throw ParseError("row 1: expected header 't_hours,outdoor_c,price_per_kwh'");

    std::vector<ForecastSample> samples;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trimmed(line).empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 3)
            throw ParseError("row " + std::to_string(row) + ": expected 3 fields, got " +
                             std::to_string(fields.size()));
        ForecastSample s;
        s.t = parse_field(fields[0], row, 1);
        s.outdoor = parse_field(fields[1], row, 2);
        s.price = parse_field(fields[2], row, 3);
        samples.push_back(s);
    }
    return ForecastSeries(std::move(samples));
}

ForecastSeries load_forecast(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open forecast file: " + path);
    return load_forecast(in);
}

ControlledSde build_tcl_sde(const TclFleetConfig& config, const ForecastSeries& forecast) {
    validate_config(config);
    const int n = config.n();
    if (forecast.t_min() > config.t_start || forecast.t_max() < config.t_end)
        throw CoverageError("forecast does not cover the control window");

    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = config.alpha[i];

    ControlledSde sde;
    sde.n = n;
    sde.m = n;
    sde.T = config.t_end - config.t_start;
    sde.K = Eigen::MatrixXd::Zero(n, n);
    sde.sigma = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        sde.K(i, i) = -config.kappa[i] / config.count[i];
        sde.sigma(i, i) = config.sigma[i];
    }

    const double t0 = config.t_start;
    sde.f = [alpha, forecast, t0](double s, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        double outdoor = forecast.outdoor_at(t0 + s);
        return alpha.array() * (outdoor - x.array());
    };
    sde.df_dx = [alpha](double, const Eigen::VectorXd&) -> Eigen::MatrixXd {
        return (-alpha).asDiagonal();
    };
    sde.drift_affine = true;
    sde.f_batch = [alpha, forecast, t0](double s, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        double outdoor = forecast.outdoor_at(t0 + s);
        return ((outdoor - x.array()).colwise() * alpha.array()).matrix();
    };
    return sde;
}

namespace {

// Per-dimension discomfort exponents and band terms.
struct DiscomfortTerms {
    Eigen::ArrayXd hot;   // exp(eta2 (x_i - theta_high))
    Eigen::ArrayXd cold;  // exp(eta2 (theta_low - x_i))
};

DiscomfortTerms discomfort_terms(const TclFleetConfig& config, const Eigen::VectorXd& x) {
    DiscomfortTerms t;
    t.hot = (config.eta2 * (x.array() - config.theta_high)).exp();
    t.cold = (config.eta2 * (config.theta_low - x.array())).exp();
    return t;
}

}  // namespace

double discomfort(const TclFleetConfig& config, const Eigen::VectorXd& x) {
    DiscomfortTerms t = discomfort_terms(config, x);
    double s = (t.hot + t.cold).sum();
    if (s < 1e150) return config.eta1 * s * s;
    // Log-domain form for extreme states: log b = log eta1 + 2 logsumexp.
    double m = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        m = std::max(m, config.eta2 * (x(i) - config.theta_high));
        m = std::max(m, config.eta2 * (config.theta_low - x(i)));
    }
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        acc += std::exp(config.eta2 * (x(i) - config.theta_high) - m);
        acc += std::exp(config.eta2 * (config.theta_low - x(i)) - m);
    }
    return std::exp(std::log(config.eta1) + 2.0 * (m + std::log(acc)));
}

GeneralizedCost build_generalized_cost(const TclFleetConfig& config,
                                       const ForecastSeries& forecast,
                                       const ControlledSde& sde) {
    validate_config(config);
    const int n = config.n();
    if (sde.n != n) throw DimensionMismatch("SDE dimension does not match the fleet config");
    for (int i = 0; i < n; ++i)
        if (sde.K(i, i) == 0.0) throw SingularK("K has a zero diagonal entry");

    // w = 1' K^-1 (row), so c(t) = p(t) w and the linear-cost rewrite is
    // V(t,x) = discomfort(x) - p(t) w f(t,x).
    Eigen::RowVectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = 1.0 / sde.K(i, i);
    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = config.alpha[i];
    Eigen::ArrayXd w_alpha = w.transpose().array() * alpha.array();

    const double t0 = config.t_start;
    const TclFleetConfig cfg = config;

    GeneralizedCost cost;
    cost.R = config.R_weight;
    cost.Phi = [](const Eigen::VectorXd&, double y) { return y; };
    cost.phi_additive_in_y = true;

    cost.V = [cfg, forecast, t0, w_alpha](double s, const Eigen::VectorXd& x) {
        double t = t0 + s;
        double lin = (w_alpha * (forecast.outdoor_at(t) - x.array())).sum();
        return discomfort(cfg, x) - forecast.price_at(t) * lin;
    };
    cost.c = [w, forecast, t0](double s) -> Eigen::RowVectorXd {
        return forecast.price_at(t0 + s) * w;
    };

    cost.dV_dx = [cfg, forecast, t0, w_alpha](double s, const Eigen::VectorXd& x) {
        double t = t0 + s;
        DiscomfortTerms terms = discomfort_terms(cfg, x);
        double total = (terms.hot + terms.cold).sum();
        Eigen::ArrayXd db = cfg.eta2 * (terms.hot - terms.cold);
        Eigen::VectorXd grad = (2.0 * cfg.eta1 * total) * db.matrix();
        grad.array() += forecast.price_at(t) * w_alpha;
        return grad;
    };
    cost.d2V_dx2 = [cfg](double, const Eigen::VectorXd& x) {
        DiscomfortTerms terms = discomfort_terms(cfg, x);
        double total = (terms.hot + terms.cold).sum();
        Eigen::ArrayXd db = cfg.eta2 * (terms.hot - terms.cold);
        Eigen::ArrayXd d2b = cfg.eta2 * cfg.eta2 * (terms.hot + terms.cold);
        Eigen::MatrixXd h = 2.0 * cfg.eta1 * (db.matrix() * db.matrix().transpose());
        h.diagonal() += (2.0 * cfg.eta1 * total) * d2b.matrix();
        return h;
    };
    cost.dPhi = [n](const Eigen::VectorXd&, double) {
        return PhiGradient{Eigen::VectorXd::Zero(n), 1.0};
    };
    cost.d2Phi = [n](const Eigen::VectorXd&, double) {
        return PhiHessian{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
    };

    cost.V_batch = [cfg, forecast, t0, w_alpha](double s, const Eigen::MatrixXd& x) {
        double t = t0 + s;
        const int q = static_cast<int>(x.cols());
        Eigen::ArrayXd total = Eigen::ArrayXd::Zero(q);
        Eigen::ArrayXd lin = Eigen::ArrayXd::Zero(q);
        double outdoor = forecast.outdoor_at(t);
        for (int i = 0; i < x.rows(); ++i) {
            Eigen::ArrayXd row = x.row(i).transpose().array();
            total += (cfg.eta2 * (row - cfg.theta_high)).exp();
            total += (cfg.eta2 * (cfg.theta_low - row)).exp();
            lin += w_alpha(i) * (outdoor - row);
        }
        return (cfg.eta1 * total.square() - forecast.price_at(t) * lin).eval();
    };
    cost.Phi_batch = [](const Eigen::MatrixXd&, const Eigen::ArrayXd& y) { return y; };

    return cost;
}

}  // namespace pathint
