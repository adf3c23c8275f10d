#pragma once

#include "pwacert/geometry.hpp"
#include "pwacert/milp.hpp"
#include "pwacert/models.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace pwacert {

/// Interval bounds of one hidden layer: preactivations z = W q + b and the
/// neuron outputs max over each channel group.
struct LayerBounds {
    Eigen::VectorXd pre_lo, pre_hi;
    Eigen::VectorXd out_lo, out_hi;
};

/// Big-M constants and variable boxes shared by every encoded step.
struct BigMConfig {
    enum class Mode { Auto, Manual };

    Mode mode = Mode::Auto;
    Eigen::VectorXd x_lo, x_hi;  // bounding box of X
    Eigen::VectorXd u_lo, u_hi;  // box enclosing U and the network range over X
    /// Relaxation of cell row r of region i: H_r (x,u) <= h_r + M (1 - gamma_i).
    std::vector<Eigen::VectorXd> region_m;
    /// Bound on |A_i x + B_i u + p_i| per region and state coordinate.
    std::vector<Eigen::VectorXd> dyn_m;
    std::vector<LayerBounds> layers;

    /// Throws InvalidModel for non-finite or negative constants and
    /// DimensionMismatch when sizes disagree with (sys, net).
    void validate(const PwaSystem& sys, const MaxoutNet& net) const;
};

/// Interval propagation of the box [lo, hi] through every hidden layer.
std::vector<LayerBounds> propagate_bounds(const MaxoutNet& net, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Auto-derived constants over the bounding box of X x U. Throws UnboundedDomain.
BigMConfig derive_big_m(const PwaSystem& sys, const MaxoutNet& net);

/// Columns of one encoded PWA step.
struct PwaStepVars {
    std::vector<int> gamma;                // region_count binaries
    std::vector<std::vector<int>> x_tilde; // region_count x n
};

/// Columns of one encoded network evaluation.
struct NnVars {
    std::vector<std::vector<int>> q;      // per hidden layer, one per neuron
    std::vector<std::vector<int>> delta;  // per hidden layer, one binary per channel
};

/// Adds gamma and the relaxed cell rows with sum(gamma) = 1. Any feasible
/// assignment with gamma_i = 1 has (x, u) in cell i.
std::vector<int> encode_region_selection(MilpProblem& milp, const PwaSystem& sys, const BigMConfig& cfg,
                                         const std::vector<int>& x, const std::vector<int>& u);

/// Adds x_tilde per region and ties x_next = sum_i x_tilde_i, where x_tilde_i
/// equals the region-i successor if gamma_i = 1 and zero otherwise.
std::vector<std::vector<int>> encode_pwa_step(MilpProblem& milp, const PwaSystem& sys, const BigMConfig& cfg,
                                              const std::vector<int>& x, const std::vector<int>& u,
                                              const std::vector<int>& gamma, const std::vector<int>& x_next);

/// Exact maxout encoding of out = net(in). Channel lower bounds are
/// unconditional; upper bounds are relaxed per channel by delta.
NnVars encode_nn(MilpProblem& milp, const MaxoutNet& net, const BigMConfig& cfg, const std::vector<int>& in,
                 const std::vector<int>& out);

struct EncodedSystem {
    MilpProblem milp;
    int horizon = 0;
    std::vector<std::vector<int>> x;  // horizon + 1 steps
    std::vector<std::vector<int>> u;  // horizon steps
    std::vector<PwaStepVars> step;
    std::vector<NnVars> nn;
    std::vector<std::string> names;   // one per column

    /// Binaries per step: region_count + channel_count.
    int binaries_per_step() const;
};

/// K-step closed loop x(k+1) = A_i x(k) + B_i net(x(k)) + p_i with x(0) in
/// x0_set and x(k) in X for k < K.
EncodedSystem encode_closed_loop(const PwaSystem& sys, const MaxoutNet& net, const BigMConfig& cfg, int K,
                                 const Polytope& x0_set);

/// Writes the problem in the plain-text LP file layout (Maximize, Subject To,
/// Bounds, Binaries, End) using the column names of the encoding.
void write_lp_format(std::ostream& os, const EncodedSystem& enc);

}  // namespace pwacert
