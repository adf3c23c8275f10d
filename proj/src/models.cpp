#include "pwacert/models.hpp"

#include "pwacert/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace pwacert {

namespace {

// Grid points (per axis) used by the sampled coverage check.
int grid_resolution(int dim)
{
    int r = 9;
    while (r > 2 && std::pow(r, dim) > 20000.0)
        --r;
    return r;
}

}  // namespace

PwaSystem::PwaSystem(std::vector<PwaRegion> regions, Polytope X, Polytope U)
    : regions_(std::move(regions)), X_(std::move(X)), U_(std::move(U))
{
    const int n = X_.dim();
    const int m = U_.dim();
    if (regions_.empty())
        throw Error(ErrorCode::InvalidModel, "system has no regions");
    for (int i = 0; i < region_count(); ++i) {
        const PwaRegion& r = regions_[i];
        const std::string tag = "region " + std::to_string(i) + ": ";
        if (r.A.rows() != n || r.A.cols() != n || r.B.rows() != n || r.B.cols() != m || r.p.size() != n)
            throw Error(ErrorCode::DimensionMismatch, tag + "A, B, p do not match n = " + std::to_string(n) +
                                                          ", m = " + std::to_string(m));
        if (r.cell.dim() != n + m)
            throw Error(ErrorCode::DimensionMismatch, tag + "cell must live in (x,u)-space of dimension n + m");
        if (r.cell.contains_point(Eigen::VectorXd::Zero(n + m), tol::kRegionMembership) &&
            r.p.lpNorm<Eigen::Infinity>() > tol::kRegionMembership)
            throw Error(ErrorCode::InvalidModel, tag + "p must vanish on a cell containing the origin");
    }

    // Sampled coverage of X x U.
    const Polytope XU = [&] {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(X_.num_constraints() + U_.num_constraints(), n + m);
        Eigen::VectorXd h(H.rows());
        H.topLeftCorner(X_.num_constraints(), n) = X_.H();
        H.bottomRightCorner(U_.num_constraints(), m) = U_.H();
        h << X_.h(), U_.h();
        return Polytope(std::move(H), std::move(h));
    }();
    const auto [lo, hi] = bounding_box(XU);
    if (!lo.allFinite() || !hi.allFinite())
        return;
    const int dim = n + m;
    const int res = grid_resolution(dim);
    std::vector<int> idx(dim, 0);
    while (true) {
        Eigen::VectorXd xi(dim);
        for (int d = 0; d < dim; ++d)
            xi(d) = lo(d) + (hi(d) - lo(d)) * idx[d] / (res - 1);
        if (XU.contains_point(xi, tol::kRegionMembership)) {
            bool covered = false;
            for (const PwaRegion& r : regions_)
                if (r.cell.contains_point(xi, tol::kRegionMembership)) {
                    covered = true;
                    break;
                }
            if (!covered) {
                std::string where;
                for (int d = 0; d < dim; ++d)
                    where += (d ? ", " : "") + std::to_string(xi(d));
                throw Error(ErrorCode::InvalidModel, "regions do not cover X x U at (" + where + ")");
            }
        }
        int d = 0;
        while (d < dim && ++idx[d] == res)
            idx[d++] = 0;
        if (d == dim)
            break;
    }
}

std::optional<int> PwaSystem::find_region(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double tol) const
{
    Eigen::VectorXd xi(x.size() + u.size());
    xi << x, u;
    for (int i = 0; i < region_count(); ++i)
        if (regions_[i].cell.contains_point(xi, tol))
            return i;
    return std::nullopt;
}

std::vector<int> PwaSystem::origin_regions() const
{
    std::vector<int> out;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(state_dim() + input_dim());
    for (int i = 0; i < region_count(); ++i)
        if (regions_[i].cell.contains_point(zero, tol::kRegionMembership))
            out.push_back(i);
    return out;
}

MaxoutNet::MaxoutNet(std::vector<MaxoutLayer> hidden, AffineLayer output)
    : hidden_(std::move(hidden)), output_(std::move(output))
{
    int prev = -1;
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
        const MaxoutLayer& L = hidden_[i];
        const std::string tag = "layer " + std::to_string(i + 1) + ": ";
        if (L.channels < 1)
            throw Error(ErrorCode::InvalidModel, tag + "channel count must be >= 1");
        if (L.W.rows() == 0 || L.W.rows() % L.channels != 0)
            throw Error(ErrorCode::DimensionMismatch, tag + "row count must be a positive multiple of the channel count");
        if (L.b.size() != L.W.rows())
            throw Error(ErrorCode::DimensionMismatch, tag + "bias length differs from row count");
        if (prev >= 0 && L.W.cols() != prev)
            throw Error(ErrorCode::DimensionMismatch, tag + "input width differs from previous layer width");
        if (i == 0)
            input_dim_ = static_cast<int>(L.W.cols());
        prev = L.width();
    }
    if (hidden_.empty())
        input_dim_ = static_cast<int>(output_.W.cols());
    else if (output_.W.cols() != prev)
        throw Error(ErrorCode::DimensionMismatch, "output layer input width differs from last hidden width");
    if (output_.b.size() != output_.W.rows())
        throw Error(ErrorCode::DimensionMismatch, "output bias length differs from output rows");
}

int MaxoutNet::input_dim() const
{
    return input_dim_;
}

int MaxoutNet::channel_count() const
{
    int total = 0;
    for (const MaxoutLayer& L : hidden_)
        total += static_cast<int>(L.W.rows());
    return total;
}

ForwardTrace forward_trace(const MaxoutNet& net, const Eigen::VectorXd& x)
{
    if (x.size() != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "network input has wrong dimension");
    ForwardTrace t;
    Eigen::VectorXd q = x;
    for (const MaxoutLayer& L : net.hidden()) {
        const Eigen::VectorXd z = L.W * q + L.b;
        const int w = L.width();
        Eigen::VectorXd y(w);
        std::vector<int> win(w);
        for (int l = 0; l < w; ++l) {
            int best = l * L.channels;
            for (int j = best + 1; j < (l + 1) * L.channels; ++j)
                if (z(j) > z(best))
                    best = j;
            y(l) = z(best);
            win[l] = best;
        }
        t.preactivations.push_back(z);
        t.outputs.push_back(y);
        t.winners.push_back(std::move(win));
        q = std::move(y);
    }
    t.result = net.output().W * q + net.output().b;
    return t;
}

Eigen::VectorXd eval_nn(const MaxoutNet& net, const Eigen::VectorXd& x)
{
    return forward_trace(net, x).result;
}

void require_origin_fixed(const MaxoutNet& net, double tol)
{
    const Eigen::VectorXd y0 = eval_nn(net, Eigen::VectorXd::Zero(net.input_dim()));
    if (y0.lpNorm<Eigen::Infinity>() > tol)
        throw Error(ErrorCode::InvalidModel,
                    "network output at the origin is nonzero (max |net(0)| = " +
                        std::to_string(y0.lpNorm<Eigen::Infinity>()) + "); saturate it first");
}

MaxoutNet saturate_nn(const MaxoutNet& net, const Eigen::VectorXd& u_lo, const Eigen::VectorXd& u_hi)
{
    const int m = net.output_dim();
    if (u_lo.size() != m || u_hi.size() != m)
        throw Error(ErrorCode::BoxInvalid, "saturation bounds must have the network output dimension");
    for (int i = 0; i < m; ++i)
        if (!(u_lo(i) < u_hi(i)) || u_lo(i) > 0.0 || u_hi(i) < 0.0)
            throw Error(ErrorCode::BoxInvalid, "saturation box must satisfy lo < hi and lo <= 0 <= hi");

    const Eigen::VectorXd phi0 = eval_nn(net, Eigen::VectorXd::Zero(net.input_dim()));
    const int w_prev = static_cast<int>(net.output().W.cols());

    // Channels of one neuron are contiguous, so the stacked blocks are
    // interleaved: neuron l compares channel 2l with channel 2l+1.
    MaxoutLayer lower_clip;
    lower_clip.channels = 2;
    lower_clip.W = Eigen::MatrixXd::Zero(2 * m, w_prev);
    lower_clip.b = Eigen::VectorXd::Zero(2 * m);
    for (int l = 0; l < m; ++l) {
        lower_clip.W.row(2 * l) = net.output().W.row(l);
        lower_clip.b(2 * l) = net.output().b(l) - phi0(l);
        lower_clip.b(2 * l + 1) = u_lo(l);
    }

    MaxoutLayer upper_clip;
    upper_clip.channels = 2;
    upper_clip.W = Eigen::MatrixXd::Zero(2 * m, m);
    upper_clip.b = Eigen::VectorXd::Zero(2 * m);
    for (int l = 0; l < m; ++l) {
        upper_clip.W(2 * l, l) = -1.0;
        upper_clip.b(2 * l + 1) = -u_hi(l);
    }

    std::vector<MaxoutLayer> layers = net.hidden();
    layers.push_back(std::move(lower_clip));
    layers.push_back(std::move(upper_clip));
    AffineLayer out{-Eigen::MatrixXd::Identity(m, m), Eigen::VectorXd::Zero(m)};
    return MaxoutNet(std::move(layers), std::move(out));
}

StepResult step_pwa(const PwaSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u)
{
    if (x.size() != sys.state_dim() || u.size() != sys.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "state or input has wrong dimension");
    const auto i = sys.find_region(x, u);
    if (!i)
        throw Error(ErrorCode::NoRegion, "no region contains the given (x, u)");
    const PwaRegion& r = sys.region(*i);
    return {r.A * x + r.B * u + r.p, *i};
}

Eigen::VectorXd eval_pwa(const PwaSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u)
{
    return step_pwa(sys, x, u).next;
}

PwaFeedback::PwaFeedback(std::vector<FeedbackPiece> pieces) : pieces_(std::move(pieces))
{
    if (pieces_.empty())
        throw Error(ErrorCode::InvalidModel, "feedback law has no pieces");
    const int n = pieces_.front().cell.dim();
    const int m = static_cast<int>(pieces_.front().K.rows());
    for (const FeedbackPiece& p : pieces_)
        if (p.cell.dim() != n || p.K.cols() != n || p.K.rows() != m || p.k.size() != m)
            throw Error(ErrorCode::DimensionMismatch, "feedback piece dimensions are inconsistent");
}

std::optional<int> PwaFeedback::find_piece(const Eigen::VectorXd& x, double tol) const
{
    for (int j = 0; j < static_cast<int>(pieces_.size()); ++j)
        if (pieces_[j].cell.contains_point(x, tol))
            return j;
    return std::nullopt;
}

Eigen::VectorXd PwaFeedback::eval(const Eigen::VectorXd& x) const
{
    const auto j = find_piece(x);
    if (!j)
        throw Error(ErrorCode::NoRegion, "no feedback cell contains the state");
    return pieces_[*j].K * x + pieces_[*j].k;
}

std::vector<Eigen::VectorXd> sample_ellipsoid(const Ellipsoid& E, double scale, int count, std::uint64_t seed)
{
    const int n = E.dim();
    // x = r * L^{-T} z with S = L L' maps the unit sphere onto x'Sx = r^2.
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(E.S()).matrixL();
    const Eigen::MatrixXd Linv_t = L.transpose().inverse();
    const double radius = scale * std::sqrt(E.level());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s) {
        Eigen::VectorXd z(n);
        for (int d = 0; d < n; ++d)
            z(d) = normal(rng);
        z /= z.norm();
        const double r = s < count / 2 ? 1.0 : std::pow(uniform(rng), 1.0 / n);
        out.push_back(radius * r * (Linv_t * z));
    }
    return out;
}

void DualModeController::validate(std::uint64_t seed) const
{
    if (!(s_scale > 0.0) || s_scale > 1.0)
        throw Error(ErrorCode::InvalidModel, "dual-mode scale must lie in (0, 1]");
    if (ellipsoid.dim() != net.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "ellipsoid dimension differs from the state dimension");
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(net.input_dim());
    if (kappa.eval(zero).lpNorm<Eigen::Infinity>() > tol::kRegionMembership)
        throw Error(ErrorCode::InvalidModel, "local feedback must vanish at the origin");
    for (const Eigen::VectorXd& x : sample_ellipsoid(ellipsoid, s_scale, 2000, seed))
        if (!kappa.find_piece(x))
            throw Error(ErrorCode::InvalidModel, "local feedback cells do not cover s * F0");
}

bool DualModeController::local_mode(const Eigen::VectorXd& x) const
{
    return ellipsoid.contains_scaled(x, s_scale);
}

Eigen::VectorXd eval_dual_mode(const DualModeController& ctrl, const Eigen::VectorXd& x)
{
    return ctrl.local_mode(x) ? ctrl.kappa.eval(x) : eval_nn(ctrl.net, x);
}

}  // namespace pwacert
