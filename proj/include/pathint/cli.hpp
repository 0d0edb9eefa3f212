#ifndef PATHINT_CLI_HPP
#define PATHINT_CLI_HPP

#include <cstdint>
#include <map>
#include <string>

#include "pathint/tcl.hpp"

namespace pathint {

// Scalar linear-quadratic benchmark:
//   dx = [a x + k u] dt + sigma dW,
//   cost E[ 1/2 s_T x_T^2 + int 1/2 q x^2 dt + 1/2 int r u^2 dt ],
// phrased with the running state cost accumulated in y and
// Phi(x, y) = 1/2 s_T x^2 + y.
struct LqParams {
    double a = 0.0;
    double k = 1.0;
    double sigma = 1.0;
    double q = 1.0;
    double r = 1.0;
    double s_T = 0.0;
    double T = 1.0;
    double x0 = 0.0;
};

ControlledSde build_lq_sde(const LqParams& params);
GeneralizedCost build_lq_cost(const LqParams& params);

// Resolved experiment description. problem: tcl_single | tcl_six | lq |
// custom (a TCL fleet given explicitly by tcl.* keys). method: standard |
// implicit | grid.
struct RunConfig {
    std::string problem = "tcl_single";
    std::string method = "implicit";
    int M = 300;                    // grid.M
    double t_start = 11.0;          // grid.t_start, absolute hours
    double t_end = 16.0;            // grid.t_end
    int Q = 5;                      // sampling.Q
    std::uint64_t master_seed = 0;  // sampling.master_seed
    std::uint64_t realization_seed = 0;
    double fd_scale = 0.05;         // fd.step_scale
    std::string output_dir;         // output.dir
    std::string forecast_file;      // forecast.file (TCL problems)
    LqParams lq;
    TclFleetConfig custom;          // only for problem = custom
    bool has_custom = false;

    // Grid-method options (hjb.*); zeros mean per-problem defaults.
    double hjb_x_min = 0.0;
    double hjb_x_max = 0.0;
    int hjb_nodes = 401;
    int hjb_time_steps = 0;  // 0 = automatic from the CFL bound
    double hjb_u_clip = 0.0;
};

// Flat "key = value" text, '#' comments. Unknown keys are rejected.
// Relative forecast paths resolve against the config file's directory.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& base_dir);

// Runs the experiment and writes trajectory.csv, diagnostics.csv and
// manifest into output_dir. Returns 0 on success, 3 on numerical failure
// (partial outputs retained). Configuration problems throw (ConfigInvalid,
// ParseError, CoverageError, DimensionUnsupported); the CLI maps those to
// exit status 2.
int run_experiment(const RunConfig& config);

// The resolved config as manifest text (sorted keys, no output.dir).
std::string manifest_text(const RunConfig& config);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace pathint

#endif
