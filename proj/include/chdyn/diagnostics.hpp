#pragma once

#include "chdyn/assembly.hpp"
#include "chdyn/potential_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

namespace chdyn {

/// Discrete free energy, its parts, the mass functionals and the dissipation
/// of the step that produced the state.
struct EnergyReport {
    double bulk_dirichlet = 0.0; // ½σδ·ΦᵀL_ΩΦ
    double bulk_potential = 0.0; // σδ⁻¹·𝟙ᵀM_Ω F(Φ)
    double surf_dirichlet = 0.0; // ½κδ_Γ·Φ_ΓᵀL_ΓΦ_Γ
    double surf_potential = 0.0; // δ_Γ⁻¹·𝟙ᵀM_Γ G(Φ_Γ)
    double total = 0.0;
    double bulk_mass = 0.0; // 𝟙ᵀM_ΩΦ
    double surf_mass = 0.0; // 𝟙ᵀM_ΓΦ_Γ
    double dissipation_bulk = 0.0; // τm·PᵀL_ΩP
    double dissipation_surf = 0.0; // τm_Γ·P_ΓᵀL_ΓP_Γ (CH) or τm_Γ·P_ΓᵀM_ΓP_Γ (AC)
    double compat_residual = 0.0;
};

/// Energy and mass functionals of Φ; dissipation fields stay zero.
inline EnergyReport energy(const SchemeContext& ctx, const Vector& phi)
{
    detail::check_length(ctx, phi, "phi");
    const auto& d = ctx.disc;
    const auto& p = ctx.params;
    const Vector phi_g = ctx.blocks().boundary(phi);

    EnergyReport e;
    e.bulk_dirichlet = 0.5 * p.sigma * p.delta * phi.dot(d.stiffness_bulk * phi);
    e.bulk_potential = p.sigma / p.delta * d.mass_bulk.diagonal.dot(detail::nodal(phi, [&](double s) { return ctx.bulk.value(s); }));
    e.surf_dirichlet = 0.5 * p.kappa * p.delta_gamma * phi_g.dot(d.stiffness_surface * phi_g);
    e.surf_potential =
        d.mass_surface.diagonal.dot(detail::nodal(phi_g, [&](double s) { return ctx.surface.value(s); })) / p.delta_gamma;
    e.total = e.bulk_dirichlet + e.bulk_potential + e.surf_dirichlet + e.surf_potential;
    e.bulk_mass = d.mass_bulk.diagonal.dot(phi);
    e.surf_mass = d.mass_surface.diagonal.dot(phi_g);
    return e;
}

/// Energy of Φⁿ plus the dissipation carried by the potentials (Pⁿ, P_Γⁿ).
inline EnergyReport step_report(const SchemeContext& ctx, const Vector& phi, const Potentials& pot)
{
    EnergyReport e = energy(ctx, phi);
    const auto& d = ctx.disc;
    const auto& p = ctx.params;
    e.dissipation_bulk = p.tau * p.mobility * pot.bulk.dot(d.stiffness_bulk * pot.bulk);
    if (p.mode == BoundaryMode::cahn_hilliard)
        e.dissipation_surf = p.tau * p.surface_mobility * pot.surface.dot(d.stiffness_surface * pot.surface);
    else
        e.dissipation_surf = p.tau * p.surface_mobility * pot.surface.dot(d.mass_surface.apply(pot.surface));
    e.compat_residual = compatibility_defect(ctx, pot).defect;
    return e;
}

/// Nonnegative numerical-dissipation terms of one step Φⁿ⁻¹ → Φⁿ.
struct StepIncrements {
    double bulk_gradient = 0.0;    // ½σδ·ΔᵀL_ΩΔ
    double surface_gradient = 0.0; // ½κδ_Γ·Δ_ΓᵀL_ΓΔ_Γ
    double surface_beta = 0.0;     // β·δ_Γ⁻¹·Δ_ΓᵀM_ΓΔ_Γ

    double sum() const { return bulk_gradient + surface_gradient + surface_beta; }
};

inline StepIncrements increment_terms(const SchemeContext& ctx, const Vector& phi, const Vector& phi_old)
{
    const auto& d = ctx.disc;
    const auto& p = ctx.params;
    const Vector diff = phi - phi_old;
    const Vector diff_g = ctx.blocks().boundary(diff);
    StepIncrements inc;
    inc.bulk_gradient = 0.5 * p.sigma * p.delta * diff.dot(d.stiffness_bulk * diff);
    inc.surface_gradient = 0.5 * p.kappa * p.delta_gamma * diff_g.dot(d.stiffness_surface * diff_g);
    inc.surface_beta = ctx.surface.beta / p.delta_gamma * diff_g.dot(d.mass_surface.apply(diff_g));
    return inc;
}

struct EnergyCheck {
    bool pass = true;
    /// total(prev) − [total(curr) + dissipation(curr) + increments]; ≥ −slack on pass
    double margin = 0.0;
    double slack = 0.0;
};

inline double energy_slack(double reference_total) { return 1e-12 * std::max(1.0, std::abs(reference_total)); }

/// Discrete energy law of one step:
///   E(Φⁿ) + τm·PᵀLP + τm_Γ·(surface dissipation) + increments ≤ E(Φⁿ⁻¹).
inline EnergyCheck energy_inequality_check(const EnergyReport& prev, const EnergyReport& curr,
                                           const StepIncrements& increments)
{
    EnergyCheck c;
    c.slack = energy_slack(prev.total);
    c.margin = prev.total - (curr.total + curr.dissipation_bulk + curr.dissipation_surf + increments.sum());
    c.pass = c.margin >= -c.slack;
    return c;
}

/// Running sum of the per-step energy law: E(Φⁿ) + Σ(dissipation) stays
/// bounded by E(Φ⁰).
struct StabilityLedger {
    double initial_total = 0.0;
    double accumulated = 0.0;
    Index steps = 0;

    void add(const EnergyReport& curr, const StepIncrements& inc)
    {
        accumulated += curr.dissipation_bulk + curr.dissipation_surf + inc.sum();
        ++steps;
    }
    double left_side(const EnergyReport& curr) const { return curr.total + accumulated; }
    bool holds(const EnergyReport& curr) const
    {
        return left_side(curr) <= initial_total + static_cast<double>(std::max<Index>(steps, 1)) * energy_slack(initial_total);
    }
};

/// Mesh/time-step coupling h⁴/τ (κ > 0) or h²/τ (κ = 0); advisory only.
struct CouplingReport {
    double ratio = 0.0;
    int power = 4;
};

inline CouplingReport assumption_C_report(double h, double tau, double kappa)
{
    CouplingReport r;
    r.power = kappa > 0.0 ? 4 : 2;
    r.ratio = std::pow(h, r.power) / tau;
    return r;
}

/// Bound on |𝟙ᵀM_ΓΦ_Γ| implied by an energy budget, for boundary laws that do
/// not conserve surface mass. Uses |s| ≤ G(s) + c_G with c_G = sup(|s| − G(s))
/// sampled on [−50, 50]; returns +inf when G grows too slowly for such a c_G.
inline double surface_mass_bound(const SchemeContext& ctx, double energy_budget)
{
    constexpr double range = 50.0;
    constexpr int samples = 200001;
    double c_g = -std::numeric_limits<double>::infinity();
    double edge = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const double s = -range + 2.0 * range * k / (samples - 1);
        const double gap = std::abs(s) - ctx.surface.value(s);
        c_g = std::max(c_g, gap);
        if (k == 0 || k == samples - 1) edge = std::max(edge, gap);
    }
    if (c_g <= edge) return std::numeric_limits<double>::infinity();
    const auto& p = ctx.params;
    const double bulk_floor = p.sigma / p.delta * ctx.disc.area() * ctx.bulk.lower_bound;
    return p.delta_gamma * (energy_budget - bulk_floor) + std::max(c_g, 0.0) * ctx.disc.perimeter();
}

// ---------------------------------------------------------------------------
// CSV time series

inline constexpr const char* csv_header =
    "step,time,newton_iters,bulk_dirichlet,bulk_potential,surf_dirichlet,surf_potential,total,"
    "bulk_mass,surf_mass,dissipation_bulk,dissipation_surf,compat_residual";

inline void write_csv_row(std::ostream& out, Index step, double time, Index newton_iters, const EnergyReport& e)
{
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << step << ',' << time << ',' << newton_iters << ',' << e.bulk_dirichlet << ',' << e.bulk_potential << ','
        << e.surf_dirichlet << ',' << e.surf_potential << ',' << e.total << ',' << e.bulk_mass << ',' << e.surf_mass
        << ',' << e.dissipation_bulk << ',' << e.dissipation_surf << ',' << e.compat_residual << '\n';
    out.precision(old_precision);
}

} // namespace chdyn
