#include "piezo/energy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "piezo/error.hpp"

namespace piezo {

namespace {

double quad(const SparseMatrix& a, const Eigen::VectorXd& x) { return x.dot(a * x); }

// int_a^b theta(s) w(s) ds with w linear between (a, wa) and (b, wb) and theta
// split at its kinks; each piece uses the trapezoid rule with one-sided limits.
template <typename Eval>
double integrate_piecewise(const TimeFunction& theta, const Eval& eval_theta, double a, double b,
                           double wa, double wb) {
  if (b <= a) return 0.0;
  std::vector<double> cuts{a};
  for (double k : theta.breakpoints()) {
    if (k > a && k < b) cuts.push_back(k);
  }
  cuts.push_back(b);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i];
    const double q = cuts[i + 1];
    const double wp = wa + (wb - wa) * (p - a) / (b - a);
    const double wq = wa + (wb - wa) * (q - a) / (b - a);
    sum += 0.5 * (q - p) * (eval_theta(p, Side::Right) * wp + eval_theta(q, Side::Left) * wq);
  }
  return sum;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

EnergyRow sample_energies(const AssembledSystem& system, const State& state,
                          const Excitation& excitation, EnergyAccumulator& acc) {
  EnergyRow row;
  row.t = state.t;
  row.kinetic = quad(system.M, state.v);
  row.strain = quad(system.K_uu, state.u);
  row.electric = quad(system.K_phiphi, state.phi0);
  row.eta_tilde = row.kinetic + row.strain + row.electric;

  const double inv_rho = 1.0 / system.rho;
  row.norm_u_L2 = std::sqrt(std::max(0.0, inv_rho * quad(system.M, state.u)));
  row.norm_v_L2 = std::sqrt(std::max(0.0, inv_rho * row.kinetic));
  row.norm_Bu_L2 = std::sqrt(std::max(0.0, quad(system.L_B, state.u)));
  row.norm_Bv_L2 = std::sqrt(std::max(0.0, quad(system.L_B, state.v)));
  row.norm_phi_H1 = std::sqrt(std::max(0.0, quad(system.L, state.phi0)));
  row.eta = row.norm_v_L2 * row.norm_v_L2 + row.norm_u_L2 * row.norm_u_L2 +
            row.norm_Bu_L2 * row.norm_Bu_L2 + row.norm_phi_H1 * row.norm_phi_H1;

  const double damping_rate = 2.0 * quad(system.C_damp, state.v);
  if (!acc.started) {
    acc.started = true;
    acc.eta_tilde0 = row.eta_tilde;
  } else {
    const double a = acc.t;
    const double b = state.t;
    acc.gamma += 0.5 * (b - a) * (acc.damping_rate + damping_rate);
    double work = 0.0;
    for (const auto& term : excitation.terms) {
      if (term.f.size() > 0) {
        work += 2.0 * integrate_piecewise(
                          term.scale, [&](double t, Side) { return term.scale.value(t); }, a, b,
                          term.f.dot(acc.v), term.f.dot(state.v));
      }
      if (term.g.size() > 0) {
        work -= 2.0 * integrate_piecewise(
                          term.scale, [&](double t, Side side) { return term.scale.rate(t, side); },
                          a, b, term.g.dot(acc.phi0), term.g.dot(state.phi0));
      }
    }
    acc.work += work;
  }
  acc.t = state.t;
  acc.v = state.v;
  acc.phi0 = state.phi0;
  acc.damping_rate = damping_rate;

  row.gamma = acc.gamma;
  row.work = acc.work;
  row.F_l = row.eta_tilde + row.gamma;
  row.F_r = acc.eta_tilde0 + row.work;
  return row;
}

double check_energy_identity(const EnergyReport& report) {
  double max_fr = 1.0;
  double max_res = 0.0;
  for (const auto& r : report.rows) {
    max_fr = std::max(max_fr, r.F_r);
    max_res = std::max(max_res, std::abs(r.residual()));
  }
  return max_res / max_fr;
}

DecayVerdict check_monotone_decay(const EnergyReport& report, std::optional<double> t0_off,
                                  double slack, double alpha, double beta, double fraction) {
  if (!t0_off) throw Error(ErrorKind::PreconditionViolated, "decay check needs t0_off");
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw Error(ErrorKind::PreconditionViolated, "decay check needs alpha > 0 and beta > 0");
  }
  DecayVerdict v;
  v.monotone = true;
  if (report.rows.empty()) return v;

  // First sample at or after t0_off (relative guard for t = k dt round-off).
  const double guard = 1e-12 * std::max(1.0, std::abs(*t0_off));
  std::size_t first = report.rows.size();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    v.eta_tilde_max = std::max(v.eta_tilde_max, report.rows[i].eta_tilde);
    if (first == report.rows.size() && report.rows[i].t >= *t0_off - guard) first = i;
  }
  v.limit = report.rows.back().eta_tilde;
  if (first == report.rows.size()) {
    v.monotone = false;  // run ended before the drive switched off
    return v;
  }
  v.eta_tilde_off = report.rows[first].eta_tilde;
  const double allowance = slack * v.eta_tilde_off;
  double max_kin = 0.0, max_strain = 0.0, max_elec = 0.0;
  for (std::size_t i = first; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    max_kin = std::max(max_kin, r.kinetic);
    max_strain = std::max(max_strain, r.strain);
    max_elec = std::max(max_elec, r.electric);
    if (i > first) {
      const double inc = r.eta_tilde - report.rows[i - 1].eta_tilde;
      v.max_increase = std::max(v.max_increase, inc);
      if (inc > allowance) v.monotone = false;
    }
  }
  const auto& last = report.rows.back();
  const auto ratio = [](double final, double peak) { return peak > 0.0 ? final / peak : 0.0; };
  v.components.kinetic_ratio = ratio(last.kinetic, max_kin);
  v.components.strain_ratio = ratio(last.strain, max_strain);
  v.components.electric_ratio = ratio(last.electric, max_elec);
  v.components.kinetic = v.components.kinetic_ratio <= fraction;
  v.components.strain = v.components.strain_ratio <= fraction;
  v.components.electric = v.components.electric_ratio <= fraction;
  return v;
}

std::string trajectory_csv_line(const EnergyRow& r) {
  std::string line;
  for (double x : {r.t, r.norm_u_L2, r.norm_Bu_L2, r.norm_v_L2, r.norm_phi_H1, r.eta, r.eta_tilde,
                   r.gamma, r.residual()}) {
    if (!line.empty()) line += ',';
    line += fmt(x);
  }
  return line;
}

}  // namespace piezo
