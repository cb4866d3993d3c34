#pragma once

#include <functional>

#include "fdelab/geometry.hpp"

namespace fdelab {

/// Exponent m of the fast diffusion equation d_t(|u|^{m-2}u) = Δu and the
/// spatial dimension N, with the derived constants used throughout.
class FdeParams {
public:
    FdeParams(double m, int dim);

    double m() const noexcept { return m_; }
    int dim() const noexcept { return dim_; }
    /// (m-1)/(m-2)
    double lambda() const noexcept { return lambda_; }
    /// 2N - Nm + 2m
    double kappa() const noexcept { return kappa_; }
    /// 4(m-1)^2/m^2
    double kappa_m() const noexcept { return kappa_m_; }
    /// m/(m-1)
    double m_conj() const noexcept { return m_conj_; }
    /// 4/(m m')
    double mu_m() const noexcept { return 4.0 / (m_ * m_conj_); }

private:
    double m_;
    int dim_;
    double lambda_;
    double kappa_;
    double kappa_m_;
    double m_conj_;
};

struct EnergyReport {
    double J = 0.0;
    double R = 0.0;
    double h10_norm = 0.0;
    double lm_norm = 0.0;
    double linf_norm = 0.0;
};

// Nodal nonlinearities.
double signed_pow(double v, double p) noexcept;  // |v|^{p-1} v
Field power_field(const Field& w, double p);     // |w|^{p-1} w nodewise

double l2_norm(const Field& f);
double lm_norm(const Field& f, double m);
double linf_norm(const Field& f);
double h10_norm(const Field& w);

double energy_J(const Field& w, const FdeParams& p);
double rayleigh_R(const Field& w, const FdeParams& p);
EnergyReport energy_report(const Field& w, const FdeParams& p);

/// Nodal residual -Δw - λ_m |w|^{m-2} w; the derivative of J under the
/// quadrature pairing.
Field frechet_Jprime(const Field& w, const FdeParams& p);
/// sqrt(<(-Δ)^{-1} f, f>)
double hminus1_norm(const Field& f);

/// n(w) with n(w) w on the discrete Nehari manifold.
double nehari_scale(const Field& w, const FdeParams& p);

/// Estimated extinction time of the FDE started from a field.
using ExtinctionService = std::function<double(const Field&)>;

/// x(w) = t*(w)^{-1/(m-2)}; x(w) w has extinction time one.
double phase_scale(const Field& w, const FdeParams& p, const ExtinctionService& extinction_time);

/// (|a|^{m-2}a - |b|^{m-2}b)(a-b) - 2^{2-m}|a-b|^m, nonnegative for m >= 2.
double tartar_gap(double a, double b, const FdeParams& p);

struct ChainRuleReport {
    double lhs = 0.0;  // ||d_s(|v|^{m-2}v)||^2
    double rhs = 0.0;  // κ_m ||v||_∞^{m-2} ||d_s(|v|^{(m-2)/2}v)||^2
    bool holds = true;
};

/// Evaluates both time derivatives by the nodal chain rule from v and v_t.
ChainRuleReport chain_rule_report(const Field& v_t, const Field& v, const FdeParams& p);
bool chain_rule_check(const Field& v_t, const Field& v, const FdeParams& p);

}  // namespace fdelab
