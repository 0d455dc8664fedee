#include "kh/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kh {

std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::SpanEnd: return "span-end";
    case Termination::Collision: return "collision";
    case Termination::StepUnderflow: return "step-underflow";
    case Termination::ZeroLimit: return "zero-limit";
    case Termination::StepLimit: return "step-limit";
    }
    return "unknown";
}

void IntegratorOptions::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError(std::string("integrator option ") + name + " must be positive and finite");
    };
    positive(rel_tol, "rel_tol");
    positive(abs_tol, "abs_tol");
    positive(max_span, "max_span");
    positive(collision_radius, "collision_radius");
    positive(axis_radius, "axis_radius");
    positive(zero_refine_tol, "zero_refine_tol");
    positive(energy_drift_bound, "energy_drift_bound");
    if (energy_level && !std::isfinite(*energy_level))
        throw DomainError("integrator option energy_level must be finite");
    if (max_steps == 0)
        throw DomainError("integrator option max_steps must be positive");
}

DenseSegment::DenseSegment(double t_from, double t_to, const std::array<Vec6, kOrder>& coeffs, const Vec6& end_state,
                           double theta_from)
    : t_from_(t_from), t_to_(t_to), coeffs_(coeffs), end_(end_state), theta_from_(theta_from)
{
}

Vec6 DenseSegment::state(double t) const
{
    if (t == t_from_)
        return coeffs_[0];
    if (t == t_to_)
        return end_;
    const double s = (t - t_from_) / (t_to_ - t_from_);
    const double s1 = 1.0 - s;
    const auto& r = coeffs_;
    Vec6 out{};
    for (std::size_t i = 0; i < 6; ++i)
        out[i] = r[0][i]
                 + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * (r[4][i] + s * (r[5][i] + s1 * (r[6][i] + s * r[7][i]))))));
    return out;
}

double DenseSegment::z(double t) const
{
    if (t == t_from_)
        return coeffs_[0][2];
    if (t == t_to_)
        return end_[2];
    const double s = (t - t_from_) / (t_to_ - t_from_);
    const double s1 = 1.0 - s;
    const auto& r = coeffs_;
    return r[0][2]
           + s * (r[1][2] + s1 * (r[2][2] + s * (r[3][2] + s1 * (r[4][2] + s * (r[5][2] + s1 * (r[6][2] + s * r[7][2]))))));
}

double DenseSegment::theta_at(double t) const
{
    double theta = theta_from_;
    for (int i = 1; i <= kLiftSubsteps; ++i) {
        const double ti = i == kLiftSubsteps ? t : t_from_ + (t - t_from_) * i / kLiftSubsteps;
        const Vec6 y = state(ti);
        if (y[0] != 0.0 || y[1] != 0.0)
            theta = unwrap_angle(std::atan2(y[1], y[0]), theta);
    }
    return theta;
}

const DenseSegment& Trajectory::segment_at(double t) const
{
    if (segments_.empty())
        throw std::logic_error("trajectory was integrated without dense output");
    if (!(t >= t_min() && t <= t_max()))
        throw DomainError("sample time " + std::to_string(t) + " outside trajectory range [" + std::to_string(t_min())
                          + ", " + std::to_string(t_max()) + "]");
    auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                               [](const DenseSegment& seg, double value) { return seg.t_hi() < value; });
    if (it == segments_.end())
        it = std::prev(segments_.end());
    return *it;
}

CartesianState Trajectory::sample(double t) const { return CartesianState::from_array(segment_at(t).state(t)); }

AdaptedState Trajectory::sample_adapted(double t) const
{
    const DenseSegment& seg = segment_at(t);
    return to_adapted(CartesianState::from_array(seg.state(t)), seg.theta_at(t));
}

CartesianState sample(const Trajectory& traj, double t) { return traj.sample(t); }

double refine_root(const std::function<double(double)>& f, double a, double b, double tol)
{
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if (!(fa * fb < 0.0))
        throw DomainError("refine_root: endpoints do not bracket a sign change");
    for (;;) {
        const double mid = a + 0.5 * (b - a);
        if (std::abs(b - a) <= tol || mid == a || mid == b)
            return mid;
        const double fm = f(mid);
        if (fm == 0.0)
            return mid;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
}

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Interior samples per step for the zero scan. When z grazes the plane a step can
// straddle two zeros while z has the same sign at both of its ends.
constexpr int kZeroSamples = 16;

/// Reports the zeros of z on [a, b] within one step, walking from a to b. last_sign is
/// the sign at a on entry and at b on exit; zb is the value used at b.
template <class Emit>
void scan_step_zeros(const DenseSegment& seg, double a, double b, double zb, int& last_sign, double tol, Emit&& emit)
{
    double prev = a;
    for (int i = 1; i <= kZeroSamples; ++i) {
        const bool end = i == kZeroSamples;
        const double t = end ? b : a + (b - a) * static_cast<double>(i) / kZeroSamples;
        const int s = sign_of(end ? zb : seg.z(t));
        if (s == 0)
            emit(t);
        else if (last_sign != 0 && s == -last_sign)
            emit(refine_root([&seg](double tt) { return seg.z(tt); }, prev, t, tol));
        last_sign = s;
        prev = t;
    }
}

constexpr double kPlanarThreshold = 1e-13;
/// Below this r / rho the orbit is treated as on the axis and the chart is not consulted.
constexpr double kAdaptedControlMinRatio = 1e-6;

// Dormand-Prince 8(5,3) coefficients (Hairer, Norsett & Wanner). The system is
// autonomous, so the node times c_i are not needed. Dense output is the
// sixth-order extension that needs no stages beyond the FSAL evaluation.
namespace dop {
constexpr double b1 = 5.42937341165687622380535766363e-2, b6 = 4.45031289275240888144113950566e0,
                 b7 = 1.89151789931450038304281599044e0, b8 = -5.8012039600105847814672114227e0,
                 b9 = 3.1116436695781989440891606237e-1, b10 = -1.52160949662516078556178806805e-1,
                 b11 = 2.01365400804030348374776537501e-1, b12 = 4.47106157277725905176885569043e-2;
constexpr double bhh1 = 0.244094488188976377952755905512e+00, bhh2 = 0.733846688281611857341361741547e+00,
                 bhh3 = 0.220588235294117647058823529412e-01;
constexpr double er1 = 0.1312004499419488073250102996e-01, er6 = -0.1225156446376204440720569753e+01,
                 er7 = -0.4957589496572501915214079952e+00, er8 = 0.1664377182454986536961530415e+01,
                 er9 = -0.3503288487499736816886487290e+00, er10 = 0.3341791187130174790297318841e+00,
                 er11 = 0.8192320648511571246570742613e-01, er12 = -0.2235530786388629525884427845e-01;
constexpr double a21 = 5.26001519587677318785587544488e-2, a31 = 1.97250569845378994544595329183e-2,
                 a32 = 5.91751709536136983633785987549e-2, a41 = 2.95875854768068491816892993775e-2,
                 a43 = 8.87627564304205475450678981324e-2, a51 = 2.41365134159266685502369798665e-1,
                 a53 = -8.84549479328286085344864962717e-1, a54 = 9.24834003261792003115737966543e-1,
                 a61 = 3.7037037037037037037037037037e-2, a64 = 1.70828608729473871279604482173e-1,
                 a65 = 1.25467687566822425016691814123e-1, a71 = 3.7109375e-2,
                 a74 = 1.70252211019544039314978060272e-1, a75 = 6.02165389804559606850219397283e-2,
                 a76 = -1.7578125e-2, a81 = 3.70920001185047927108779319836e-2,
                 a84 = 1.70383925712239993810214054705e-1, a85 = 1.07262030446373284651809199168e-1,
                 a86 = -1.53194377486244017527936158236e-2, a87 = 8.27378916381402288758473766002e-3,
                 a91 = 6.24110958716075717114429577812e-1, a94 = -3.36089262944694129406857109825e0,
                 a95 = -8.68219346841726006818189891453e-1, a96 = 2.75920996994467083049415600797e1,
                 a97 = 2.01540675504778934086186788979e1, a98 = -4.34898841810699588477366255144e1,
                 a101 = 4.77662536438264365890433908527e-1, a104 = -2.48811461997166764192642586468e0,
                 a105 = -5.90290826836842996371446475743e-1, a106 = 2.12300514481811942347288949897e1,
                 a107 = 1.52792336328824235832596922938e1, a108 = -3.32882109689848629194453265587e1,
                 a109 = -2.03312017085086261358222928593e-2, a111 = -9.3714243008598732571704021658e-1,
                 a114 = 5.18637242884406370830023853209e0, a115 = 1.09143734899672957818500254654e0,
                 a116 = -8.14978701074692612513997267357e0, a117 = -1.85200656599969598641566180701e1,
                 a118 = 2.27394870993505042818970056734e1, a119 = 2.49360555267965238987089396762e0,
                 a1110 = -3.0467644718982195003823669022e0, a121 = 2.27331014751653820792359768449e0,
                 a124 = -1.05344954667372501984066689879e1, a125 = -2.00087205822486249909675718444e0,
                 a126 = -1.79589318631187989172765950534e1, a127 = 2.79488845294199600508499808837e1,
                 a128 = -2.85899827713502369474065508674e0, a129 = -8.87285693353062954433549289258e0,
                 a1210 = 1.23605671757943030647266201528e1, a1211 = 6.43392746015763530355970484046e-1;
constexpr double d41 = -5.40685903845352664250302, d46 = 367.268892700041893590281, d47 = 154.609958204083905482676,
                 d48 = -505.920283865412564024766, d49 = 15.5975154819608130688200, d410 = -26.1936204184402805956691,
                 d411 = -0.74003512364122230844721, d412 = 1.11776539319431476294221, d413 = -0.33333333333333333333333;
constexpr double d51 = 6.51987095363079615048119, d56 = -1066.34956011730205278592, d57 = -351.864047514639508625601,
                 d58 = 1363.51955696662884408368, d59 = -112.727669432657582669864, d510 = 159.796191868560289612921,
                 d511 = -2.13865100308788816220259, d512 = -3.75569172113289760348584, d513 = 7.0;
constexpr double d61 = 10.4698004763293477204238, d66 = -1380.01473607038123167155, d67 = -531.219827862514074379012,
                 d68 = 1866.98964341870892451324, d69 = -53.3302605020547902574560, d610 = 82.4147560258671369782481,
                 d611 = 7.38443654502992069572676, d612 = 0.41729908012587751149843, d613 = -3.11111111111111111111111;
constexpr double d71 = -16.6338582677165354330709, d76 = 4516.16568914956011730205, d77 = 1393.85185384057776465219,
                 d78 = -5687.52042419481539670071, d79 = 473.965563750151263163661, d710 = -661.810776942355889724311,
                 d711 = -18.0180473354013232598119;
constexpr double safe = 0.9, fac1 = 0.333, fac2 = 6.0;
} // namespace dop

/// Per-coordinate tolerance scale abs_tol * weight + rel_tol * max(|y|, |y_new|), with
/// weights of the same dilation degree as the coordinate. x and y are weighted by the
/// planar radius r rather than rho: both scale like rho, but near the z-axis the
/// adapted chart divides by r^2, and errors of order abs_tol * rho in x, y would swamp it.
/// The weight is floored where the adapted chart is no longer used, so an orbit on the
/// z-axis itself keeps a finite tolerance.
struct ErrorScale {
    Vec6 abs_part{};

    ErrorScale(const Vec6& y, double abs_tol)
    {
        const double rho = heis_radius(y[0], y[1], y[2]);
        const double r = std::max(std::hypot(y[0], y[1]), kAdaptedControlMinRatio * rho);
        const double inv = 1.0 / rho;
        abs_part = {abs_tol * r, abs_tol * r, abs_tol * rho * rho, abs_tol * inv, abs_tol * inv, abs_tol * inv * inv};
    }
};

/// One Newton step from y towards the level set H = H0, along grad H with its components
/// along grad J and grad p_theta removed, all in dilation-weighted coordinates. The
/// correction therefore changes neither J nor p_theta to first order. f is the vector
/// field at y; grad H = (-f_p, f_q). Returns false when the direction degenerates.
bool project_energy(Vec6& y, const Vec6& f, double H0)
{
    const CartesianState c = CartesianState::from_array(y);
    const double defect = hamiltonian_cartesian(c) - H0;
    if (defect == 0.0)
        return false;
    const double rho = heis_radius(c);
    const double inv = 1.0 / rho;
    const Vec6 w{rho, rho, rho * rho, inv, inv, inv * inv};

    Vec6 g{-f[3], -f[4], -f[5], f[0], f[1], f[2]};
    Vec6 a{c.px, c.py, 2.0 * c.pz, c.x, c.y, 2.0 * c.z};
    Vec6 b{c.py, -c.px, 0.0, -c.y, c.x, 0.0};
    for (std::size_t i = 0; i < 6; ++i) {
        g[i] *= w[i];
        a[i] *= w[i];
        b[i] *= w[i];
    }
    auto dot = [](const Vec6& u, const Vec6& v) {
        double acc = 0;
        for (std::size_t i = 0; i < 6; ++i)
            acc += u[i] * v[i];
        return acc;
    };
    auto remove = [&](Vec6& u, const Vec6& e) {
        const double ee = dot(e, e);
        if (ee <= 0.0)
            return;
        const double k = dot(u, e) / ee;
        for (std::size_t i = 0; i < 6; ++i)
            u[i] -= k * e[i];
    };
    // Gram-Schmidt: orthogonalize b against a, then strip both from g.
    const double aa = dot(a, a);
    remove(b, a);
    Vec6 v = g;
    remove(v, a);
    if (dot(b, b) > 1e-24 * std::max(aa, 1e-300))
        remove(v, b);

    const double gv = dot(g, v);
    if (!(gv > 1e-6 * dot(g, g)))
        return false;
    const double step = -defect / gv;
    for (std::size_t i = 0; i < 6; ++i)
        y[i] += step * v[i] * w[i];
    return true;
}

bool all_finite(const Vec6& v)
{
    return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

class Dop853Stepper {
public:
    Dop853Stepper(const IntegratorOptions& opts, IntegrationStats& stats) : opts_(opts), stats_(stats) {}

    void eval(const Vec6& y, Vec6& dy)
    {
        ++stats_.evaluations;
        vector_field(y, dy);
        if (!all_finite(dy))
            throw SingularityError("nonfinite vector field");
    }

    /// Initial step guess (Hairer's HINIT) with the dilation-weighted norm.
    double initial_step(const Vec6& y, const Vec6& f0, double dir, double hmax)
    {
        const ErrorScale scale(y, opts_.abs_tol);
        double dnf = 0, dny = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double sk = scale.abs_part[i] + opts_.rel_tol * std::abs(y[i]);
            dnf += (f0[i] / sk) * (f0[i] / sk);
            dny += (y[i] / sk) * (y[i] / sk);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
        h = std::min(h, hmax);

        Vec6 y1{}, f1{};
        for (std::size_t i = 0; i < 6; ++i)
            y1[i] = y[i] + dir * h * f0[i];
        try {
            eval(y1, f1);
        } catch (const SingularityError&) {
            return dir * std::min(1e-6, hmax);
        }
        double der2 = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double sk = scale.abs_part[i] + opts_.rel_tol * std::abs(y[i]);
            der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 1.0 / 8.0);
        return dir * std::min({100.0 * std::abs(h), h1, hmax});
    }

    /// The DOP853 error measure applied to the chart images of the two error estimates:
    /// the analysis reads the solution in adapted coordinates, whose chart is badly
    /// conditioned near the z-axis (p_u carries 1/R), so Cartesian control alone
    /// under-resolves close passages. Adapted differences are dilation invariant.
    double adapted_error(const Vec6& y_new, const Vec6& d5, const Vec6& d3) const
    {
        const CartesianState c = CartesianState::from_array(y_new);
        const double r = std::sqrt(c.planar_radius_sq());
        if (!(r > kAdaptedControlMinRatio * heis_radius(c)))
            return 0.0;
        Vec6 a{}, a5{}, a3{};
        try {
            Vec6 y5 = y_new, y3 = y_new;
            for (std::size_t i = 0; i < 6; ++i) {
                y5[i] -= d5[i];
                y3[i] -= d3[i];
            }
            a = to_adapted(c).to_array();
            a5 = to_adapted(CartesianState::from_array(y5)).to_array();
            a3 = to_adapted(CartesianState::from_array(y3)).to_array();
        } catch (const DomainError&) {
            return 0.0;
        }
        double err = 0, err2 = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            double e = a[i] - a5[i];
            double e2 = a[i] - a3[i];
            if (i == 1) {
                e = std::remainder(e, 2.0 * kPi);
                e2 = std::remainder(e2, 2.0 * kPi);
            }
            // s, theta, u are additive or bounded; the momenta get a relative part.
            const double sk = opts_.abs_tol + (i >= 3 ? opts_.rel_tol * std::abs(a[i]) : 0.0);
            err += (e / sk) * (e / sk);
            err2 += (e2 / sk) * (e2 / sk);
        }
        double deno = err + 0.01 * err2;
        if (deno <= 0.0)
            return 0.0;
        return err / std::sqrt(deno * 6.0);
    }

    struct Attempt {
        bool accepted = false;
        double error = 0;
    };

    /// One trial step of size h from (y, k1). On acceptance fills y_new, f_new and the
    /// dense-output coefficients.
    Attempt attempt(const Vec6& y, const Vec6& k1, double h, Vec6& y_new, Vec6& f_new, std::array<Vec6, 8>& dense)
    {
        using namespace dop;
        Vec6 k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, k8{}, k9{}, k10{}, k11{}, k12{}, tmp{};
        try {
            for (std::size_t i = 0; i < 6; ++i) tmp[i] = y[i] + h * a21 * k1[i];
            eval(tmp, k2);
            for (std::size_t i = 0; i < 6; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
            eval(tmp, k3);
            for (std::size_t i = 0; i < 6; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a43 * k3[i]);
            eval(tmp, k4);
            for (std::size_t i = 0; i < 6; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a53 * k3[i] + a54 * k4[i]);
            eval(tmp, k5);
            for (std::size_t i = 0; i < 6; ++i) tmp[i] = y[i] + h * (a61 * k1[i] + a64 * k4[i] + a65 * k5[i]);
            eval(tmp, k6);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i] + h * (a71 * k1[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            eval(tmp, k7);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i] + h * (a81 * k1[i] + a84 * k4[i] + a85 * k5[i] + a86 * k6[i] + a87 * k7[i]);
            eval(tmp, k8);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i] + h * (a91 * k1[i] + a94 * k4[i] + a95 * k5[i] + a96 * k6[i] + a97 * k7[i] + a98 * k8[i]);
            eval(tmp, k9);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i]
                         + h * (a101 * k1[i] + a104 * k4[i] + a105 * k5[i] + a106 * k6[i] + a107 * k7[i] + a108 * k8[i]
                                + a109 * k9[i]);
            eval(tmp, k10);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i]
                         + h * (a111 * k1[i] + a114 * k4[i] + a115 * k5[i] + a116 * k6[i] + a117 * k7[i] + a118 * k8[i]
                                + a119 * k9[i] + a1110 * k10[i]);
            eval(tmp, k11);
            for (std::size_t i = 0; i < 6; ++i)
                tmp[i] = y[i]
                         + h * (a121 * k1[i] + a124 * k4[i] + a125 * k5[i] + a126 * k6[i] + a127 * k7[i] + a128 * k8[i]
                                + a129 * k9[i] + a1210 * k10[i] + a1211 * k11[i]);
            eval(tmp, k12);
        } catch (const SingularityError&) {
            return {false, std::numeric_limits<double>::infinity()};
        }

        Vec6 incr{};
        for (std::size_t i = 0; i < 6; ++i) {
            incr[i] = b1 * k1[i] + b6 * k6[i] + b7 * k7[i] + b8 * k8[i] + b9 * k9[i] + b10 * k10[i] + b11 * k11[i]
                      + b12 * k12[i];
            y_new[i] = y[i] + h * incr[i];
        }
        if (!all_finite(y_new))
            return {false, std::numeric_limits<double>::infinity()};

        const ErrorScale scale(y, opts_.abs_tol);
        double err = 0, err2 = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double sk = scale.abs_part[i] + opts_.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            const double e2 = incr[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i];
            err2 += (e2 / sk) * (e2 / sk);
            const double e = er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] + er10 * k10[i]
                             + er11 * k11[i] + er12 * k12[i];
            err += (e / sk) * (e / sk);
        }
        double deno = err + 0.01 * err2;
        if (deno <= 0.0)
            deno = 1.0;
        err = std::abs(h) * err / std::sqrt(deno * 6.0);
        if (opts_.adapted_error_control && std::isfinite(err)) {
            Vec6 d5{}, d3{};
            for (std::size_t i = 0; i < 6; ++i) {
                d5[i] = h * (er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] + er10 * k10[i]
                             + er11 * k11[i] + er12 * k12[i]);
                d3[i] = h * (incr[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i]);
            }
            err = std::max(err, adapted_error(y_new, d5, d3));
        }
        if (!std::isfinite(err))
            return {false, std::numeric_limits<double>::infinity()};
        if (err > 1.0)
            return {false, err};

        try {
            eval(y_new, f_new);
        } catch (const SingularityError&) {
            return {false, std::numeric_limits<double>::infinity()};
        }

        for (std::size_t i = 0; i < 6; ++i) {
            const double ydiff = y_new[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            dense[0][i] = y[i];
            dense[1][i] = ydiff;
            dense[2][i] = bspl;
            dense[3][i] = ydiff - h * f_new[i] - bspl;
            dense[4][i] = h * (d41 * k1[i] + d46 * k6[i] + d47 * k7[i] + d48 * k8[i] + d49 * k9[i] + d410 * k10[i]
                               + d411 * k11[i] + d412 * k12[i] + d413 * f_new[i]);
            dense[5][i] = h * (d51 * k1[i] + d56 * k6[i] + d57 * k7[i] + d58 * k8[i] + d59 * k9[i] + d510 * k10[i]
                               + d511 * k11[i] + d512 * k12[i] + d513 * f_new[i]);
            dense[6][i] = h * (d61 * k1[i] + d66 * k6[i] + d67 * k7[i] + d68 * k8[i] + d69 * k9[i] + d610 * k10[i]
                               + d611 * k11[i] + d612 * k12[i] + d613 * f_new[i]);
            dense[7][i] = h * (d71 * k1[i] + d76 * k6[i] + d77 * k7[i] + d78 * k8[i] + d79 * k9[i] + d710 * k10[i]
                               + d711 * k11[i]);
        }
        return {true, err};
    }

private:
    const IntegratorOptions& opts_;
    IntegrationStats& stats_;
};

/// Time accumulator with compensated summation, so that millions of tiny steps
/// near a collision do not drift the clock.
class CompensatedClock {
public:
    explicit CompensatedClock(double t) : t_(t) {}
    [[nodiscard]] double value() const { return t_; }
    /// Exact remaining distance to `target` (before rounding).
    [[nodiscard]] double remaining(double target) const { return (target - t_) - carry_; }
    void advance(double h)
    {
        const double y = h - carry_;
        const double next = t_ + y;
        carry_ = (next - t_) - y;
        t_ = next;
    }
    void set(double t)
    {
        t_ = t;
        carry_ = 0;
    }

private:
    double t_;
    double carry_ = 0;
};

} // namespace

Trajectory integrate(const CartesianState& c0, TimeSpan span, const IntegratorOptions& opts)
{
    opts.validate();
    if (!std::isfinite(span.start) || !std::isfinite(span.end) || span.start == span.end)
        throw DomainError("integrate: time span must be finite and nonempty");
    const Vec6 y0 = c0.to_array();
    if (!all_finite(y0))
        throw DomainError("integrate: nonfinite initial state");
    const double rho0 = heis_radius(c0);
    if (rho0 == 0.0)
        throw SingularityError("integrate: initial state at the origin");
    if (rho0 < opts.collision_radius)
        throw SingularityError("integrate: initial state inside the collision radius");

    const double dir = span.end > span.start ? 1.0 : -1.0;
    const double length = std::min(std::abs(span.end - span.start), opts.max_span);
    const double t_target = span.start + dir * length;

    Trajectory tr;
    tr.t_start_ = span.start;
    tr.direction_ = static_cast<int>(dir);
    tr.initial_ = c0;
    tr.invariants0_ = conserved_triple(c0);

    IntegrationStats& stats = tr.stats_;
    Dop853Stepper stepper(opts, stats);

    Vec6 y = y0;
    Vec6 k1{};
    stepper.eval(y, k1);

    double theta = c0.planar_radius_sq() > 0.0 ? std::atan2(c0.y, c0.x) : 0.0;
    const double H0 = opts.energy_level.value_or(tr.invariants0_.H);

    bool planar_candidate = std::abs(y[2]) < kPlanarThreshold && std::abs(k1[2]) < kPlanarThreshold;
    if (y[2] == 0.0 && !planar_candidate)
        tr.zeros_.push_back(span.start);
    int last_sign = sign_of(y[2]);
    if (c0.planar_radius_sq() < opts.axis_radius * opts.axis_radius)
        tr.axis_proximity_ = true;

    CompensatedClock clock(span.start);
    double h = stepper.initial_step(y, k1, dir, length);
    bool rejected_last = false;
    Vec6 y_new{}, f_new{};
    std::array<Vec6, 8> dense{};

    for (;;) {
        if (stats.steps >= opts.max_steps) {
            tr.termination_ = Termination::StepLimit;
            break;
        }
        const double rem = dir * clock.remaining(t_target);
        if (rem <= 0.0) {
            tr.termination_ = Termination::SpanEnd;
            break;
        }
        bool final_step = false;
        if (std::abs(h) >= rem) {
            h = dir * rem;
            final_step = true;
        }
        const double t = clock.value();
        if (std::abs(h) <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(t) || std::abs(h) < 1e-300) {
            tr.termination_ = Termination::StepUnderflow;
            tr.collision_time_ = t;
            break;
        }

        const auto trial = stepper.attempt(y, k1, h, y_new, f_new, dense);
        const double fac = std::clamp(std::pow(trial.error, 1.0 / 8.0) / dop::safe, 1.0 / dop::fac2, 1.0 / dop::fac1);
        if (!trial.accepted) {
            ++stats.rejections;
            h /= fac;
            rejected_last = true;
            continue;
        }

        ++stats.steps;
        stats.min_step = std::min(stats.min_step, std::abs(h));
        if (final_step)
            clock.set(t_target);
        else
            clock.advance(h);
        const double t_new = clock.value();

        // Energy bookkeeping on the unprojected step.
        {
            const CartesianState c_raw = CartesianState::from_array(y_new);
            const double K = kinetic_energy(c_raw);
            const double drift = std::abs(K + potential_energy(c_raw) - H0) / std::max(1.0, K);
            stats.max_energy_drift = std::max(stats.max_energy_drift, drift);
            if (drift > opts.energy_drift_bound)
                tr.drift_exceeded_ = true;
        }
        if (opts.project_energy && project_energy(y_new, f_new, H0))
            stepper.eval(y_new, f_new);

        const CartesianState c_new = CartesianState::from_array(y_new);
        const double planar_new = c_new.planar_radius_sq();
        const DenseSegment seg(t, t_new, dense, y_new, theta);
        if (planar_new > 0.0)
            theta = seg.theta_at(t_new);
        if (planar_new < opts.axis_radius * opts.axis_radius)
            tr.axis_proximity_ = true;

        // Zero crossings of z.
        if (planar_candidate && (std::abs(y_new[2]) >= kPlanarThreshold || std::abs(f_new[2]) >= kPlanarThreshold)) {
            planar_candidate = false;
            last_sign = sign_of(y_new[2]);
        } else if (!planar_candidate) {
            scan_step_zeros(seg, t, t_new, y_new[2], last_sign, opts.zero_refine_tol,
                            [&tr](double tz) { tr.zeros_.push_back(tz); });
        }

        if (opts.dense_output)
            tr.segments_.push_back(seg);

        y = y_new;
        k1 = f_new;

        if (heis_radius(c_new) < opts.collision_radius) {
            tr.termination_ = Termination::Collision;
            tr.collision_time_ = t_new;
            break;
        }
        if (opts.max_zeros > 0 && tr.zeros_.size() >= opts.max_zeros) {
            tr.termination_ = Termination::ZeroLimit;
            break;
        }

        double h_new = h / fac;
        if (rejected_last)
            h_new = dir * std::min(std::abs(h_new), std::abs(h));
        rejected_last = false;
        h = h_new;
    }

    tr.final_ = CartesianState::from_array(y);
    tr.t_final_ = clock.value();
    tr.planar_ = planar_candidate;
    if (tr.planar_)
        tr.zeros_.clear();

    std::sort(tr.zeros_.begin(), tr.zeros_.end());
    if (dir < 0)
        std::reverse(tr.segments_.begin(), tr.segments_.end());
    return tr;
}

ZeroScan find_z_zeros(const Trajectory& traj, double refine_tol)
{
    ZeroScan out;
    out.planar = traj.planar();
    if (out.planar)
        return out;
    if (!traj.has_dense_output()) {
        out.times = traj.z_zeros();
        return out;
    }

    const auto segs = traj.segments();
    // The integration start counts as a zero only when z vanishes there exactly.
    const auto& first = traj.direction() > 0 ? segs.front() : segs.back();
    const bool start_zero = first.from_state()[2] == 0.0;

    if (start_zero)
        out.times.push_back(traj.t_start());
    int last_sign = 0;
    bool primed = false;
    for (const auto& seg : segs) {
        const double a = seg.t_lo();
        const double b = seg.t_hi();
        if (!primed) {
            last_sign = sign_of(seg.z(a));
            primed = true;
        }
        scan_step_zeros(seg, a, b, seg.z(b), last_sign, refine_tol, [&](double t) {
            if (t != traj.t_start())
                out.times.push_back(t);
        });
    }
    std::sort(out.times.begin(), out.times.end());
    out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());
    return out;
}

} // namespace kh
