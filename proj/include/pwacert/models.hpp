#pragma once

#include "pwacert/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace pwacert {

/// One affine mode x+ = A x + B u + p, active on a cell of (x, u)-space.
struct PwaRegion {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd p;
    Polytope cell;  // dimension n + m
};

/// Piecewise-affine plant over the state/input constraint sets X and U.
class PwaSystem {
public:
    PwaSystem() = default;

    /// Validates dimensions, p = 0 on every cell containing the origin, and a
    /// sampled coverage of X x U by the cells. Throws InvalidModel.
    PwaSystem(std::vector<PwaRegion> regions, Polytope X, Polytope U);

    int state_dim() const { return static_cast<int>(X_.dim()); }
    int input_dim() const { return static_cast<int>(U_.dim()); }
    int region_count() const { return static_cast<int>(regions_.size()); }

    const std::vector<PwaRegion>& regions() const { return regions_; }
    const PwaRegion& region(int i) const { return regions_.at(i); }
    const Polytope& X() const { return X_; }
    const Polytope& U() const { return U_; }

    /// Lowest-index cell containing (x, u) within tol.
    std::optional<int> find_region(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                   double tol = tol::kRegionMembership) const;

    /// Indices of cells containing the origin.
    std::vector<int> origin_regions() const;

private:
    std::vector<PwaRegion> regions_;
    Polytope X_;
    Polytope U_;
};

struct MaxoutLayer {
    Eigen::MatrixXd W;  // (channels * width) x previous width
    Eigen::VectorXd b;
    int channels = 1;

    int width() const { return static_cast<int>(W.rows()) / channels; }
};

struct AffineLayer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
};

/// Feed-forward maxout network: each hidden neuron outputs the maximum of a
/// contiguous group of `channels` affine preactivations.
class MaxoutNet {
public:
    MaxoutNet() = default;
    /// Throws DimensionMismatch if the dimension chain is inconsistent.
    MaxoutNet(std::vector<MaxoutLayer> hidden, AffineLayer output);

    int input_dim() const;
    int output_dim() const { return static_cast<int>(output_.W.rows()); }
    int depth() const { return static_cast<int>(hidden_.size()); }
    const std::vector<MaxoutLayer>& hidden() const { return hidden_; }
    const AffineLayer& output() const { return output_; }

    /// Sum over hidden layers of channels * width (one binary per channel).
    int channel_count() const;

private:
    std::vector<MaxoutLayer> hidden_;
    AffineLayer output_;
    int input_dim_ = 0;
};

/// Hidden-layer outputs and the winning channel (lowest index on ties) of
/// every neuron, as produced by one forward pass.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> preactivations;
    std::vector<Eigen::VectorXd> outputs;
    std::vector<std::vector<int>> winners;
    Eigen::VectorXd result;
};

ForwardTrace forward_trace(const MaxoutNet& net, const Eigen::VectorXd& x);
Eigen::VectorXd eval_nn(const MaxoutNet& net, const Eigen::VectorXd& x);

/// Throws InvalidModel unless |net(0)| <= tol componentwise.
void require_origin_fixed(const MaxoutNet& net, double tol = tol::kRegionMembership);

/// Appends two maxout layers so the result is
///   min(max(net(x) - net(0), u_lo), u_hi),
/// which vanishes at the origin and ranges inside [u_lo, u_hi].
/// Throws BoxInvalid unless u_lo < u_hi and u_lo <= 0 <= u_hi.
MaxoutNet saturate_nn(const MaxoutNet& net, const Eigen::VectorXd& u_lo, const Eigen::VectorXd& u_hi);

struct StepResult {
    Eigen::VectorXd next;
    int region;
};

/// Successor under the lowest-index cell containing (x, u). Throws NoRegion.
StepResult step_pwa(const PwaSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u);
Eigen::VectorXd eval_pwa(const PwaSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

/// Piecewise-affine state feedback u = K x + k on polyhedral cells of x-space.
struct FeedbackPiece {
    Eigen::MatrixXd K;
    Eigen::VectorXd k;
    Polytope cell;
};

class PwaFeedback {
public:
    PwaFeedback() = default;
    explicit PwaFeedback(std::vector<FeedbackPiece> pieces);

    const std::vector<FeedbackPiece>& pieces() const { return pieces_; }
    std::optional<int> find_piece(const Eigen::VectorXd& x, double tol = tol::kRegionMembership) const;
    /// Throws NoRegion when no cell contains x.
    Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

private:
    std::vector<FeedbackPiece> pieces_;
};

/// Switches from the network to the local law kappa inside s * F0.
struct DualModeController {
    MaxoutNet net;
    PwaFeedback kappa;
    Ellipsoid ellipsoid;
    double s_scale = 1.0;

    /// kappa(0) = 0, 0 < s_scale <= 1 and sampled coverage of s * F0 by the
    /// kappa cells. Throws InvalidModel.
    void validate(std::uint64_t seed = 7) const;
    bool local_mode(const Eigen::VectorXd& x) const;
};

Eigen::VectorXd eval_dual_mode(const DualModeController& ctrl, const Eigen::VectorXd& x);

/// Deterministic samples inside { x'Sx <= scale^2 level } (first half on the
/// boundary, the rest uniform in the interior).
std::vector<Eigen::VectorXd> sample_ellipsoid(const Ellipsoid& E, double scale, int count, std::uint64_t seed);

}  // namespace pwacert
