#include "fdelab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdelab {

FdeParams::FdeParams(double m, int dim) : m_(m), dim_(dim) {
    if (dim < 1) throw Error(ErrorCode::InvalidParams, "dimension must be >= 1");
    if (!(m > 2.0) || !std::isfinite(m)) throw Error(ErrorCode::InvalidParams, "need m > 2");
    if (dim >= 3 && !(m < 2.0 * dim / (dim - 2.0)))
        throw Error(ErrorCode::InvalidParams, "need m < 2N/(N-2) for N >= 3");
    lambda_ = (m - 1.0) / (m - 2.0);
    kappa_ = 2.0 * dim - dim * m + 2.0 * m;
    kappa_m_ = 4.0 * (m - 1.0) * (m - 1.0) / (m * m);
    m_conj_ = m / (m - 1.0);
}

double signed_pow(double v, double p) noexcept {
    return std::copysign(std::pow(std::abs(v), p), v);
}

Field power_field(const Field& w, double p) {
    Field out = w;
    for (auto& v : out.values()) v = signed_pow(v, p);
    return out;
}

double l2_norm(const Field& f) { return std::sqrt(inner(f, f)); }

double lm_norm(const Field& f, double m) {
    const auto wts = f.grid()->weights();
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += wts[k] * std::pow(std::abs(f[k]), m);
    return std::pow(s, 1.0 / m);
}

double linf_norm(const Field& f) {
    double s = 0.0;
    for (double v : f.values()) s = std::max(s, std::abs(v));
    return s;
}

double h10_norm(const Field& w) {
    return std::sqrt(std::max(0.0, LaplaceOperator(w.grid()).dirichlet_form(w)));
}

double energy_J(const Field& w, const FdeParams& p) {
    const double h = LaplaceOperator(w.grid()).dirichlet_form(w);
    const double lm = lm_norm(w, p.m());
    return 0.5 * h - p.lambda() / p.m() * std::pow(lm, p.m());
}

double rayleigh_R(const Field& w, const FdeParams& p) {
    const double lm = lm_norm(w, p.m());
    if (!(lm > 0.0)) throw Error(ErrorCode::ZeroField, "Rayleigh quotient of the zero field");
    return h10_norm(w) / lm;
}

EnergyReport energy_report(const Field& w, const FdeParams& p) {
    EnergyReport r;
    r.h10_norm = h10_norm(w);
    r.lm_norm = lm_norm(w, p.m());
    r.linf_norm = linf_norm(w);
    r.J = 0.5 * r.h10_norm * r.h10_norm - p.lambda() / p.m() * std::pow(r.lm_norm, p.m());
    r.R = r.lm_norm > 0.0 ? r.h10_norm / r.lm_norm : 0.0;
    return r;
}

Field frechet_Jprime(const Field& w, const FdeParams& p) {
    Field out = LaplaceOperator(w.grid()).apply(w);
    out *= -1.0;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= p.lambda() * signed_pow(w[k], p.m() - 1.0);
    return out;
}

double hminus1_norm(const Field& f) {
    const Field g = LaplaceOperator(f.grid()).solve_poisson(f);
    return std::sqrt(std::max(0.0, inner(g, f)));
}

double nehari_scale(const Field& w, const FdeParams& p) {
    const double lm = lm_norm(w, p.m());
    if (!(lm > 0.0)) throw Error(ErrorCode::ZeroField, "Nehari scaling of the zero field");
    const double h = LaplaceOperator(w.grid()).dirichlet_form(w);
    return std::pow(h / (p.lambda() * std::pow(lm, p.m())), 1.0 / (p.m() - 2.0));
}

double phase_scale(const Field& w, const FdeParams& p, const ExtinctionService& extinction_time) {
    if (w.is_zero()) throw Error(ErrorCode::ZeroField, "phase scaling of the zero field");
    const double t_star = extinction_time(w);
    if (!(t_star > 0.0) || !std::isfinite(t_star))
        throw Error(ErrorCode::ProjectionFailure, "extinction time estimate is not positive");
    return std::pow(t_star, -1.0 / (p.m() - 2.0));
}

double tartar_gap(double a, double b, const FdeParams& p) {
    const double m = p.m();
    const double omega = std::pow(2.0, 2.0 - m);
    return (signed_pow(a, m - 1.0) - signed_pow(b, m - 1.0)) * (a - b) -
           omega * std::pow(std::abs(a - b), m);
}

ChainRuleReport chain_rule_report(const Field& v_t, const Field& v, const FdeParams& p) {
    if (v_t.size() != v.size()) throw Error(ErrorCode::ShapeMismatch, "v_t and v differ in size");
    require_same_grid(v_t, v);
    const double m = p.m();
    const auto wts = v.grid()->weights();
    double full = 0.0;
    double half = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double a = std::abs(v[k]);
        const double d_full = (m - 1.0) * std::pow(a, m - 2.0) * v_t[k];
        const double d_half = 0.5 * m * std::pow(a, 0.5 * (m - 2.0)) * v_t[k];
        full += wts[k] * d_full * d_full;
        half += wts[k] * d_half * d_half;
    }
    ChainRuleReport r;
    r.lhs = full;
    r.rhs = p.kappa_m() * std::pow(linf_norm(v), m - 2.0) * half;
    r.holds = r.lhs <= 1.01 * r.rhs + std::numeric_limits<double>::min();
    return r;
}

bool chain_rule_check(const Field& v_t, const Field& v, const FdeParams& p) {
    return chain_rule_report(v_t, v, p).holds;
}

}  // namespace fdelab
