#pragma once

#include <optional>
#include <string>
#include <vector>

#include "piezo/assembly.hpp"
#include "piezo/drive.hpp"
#include "piezo/timeint.hpp"

namespace piezo {

/// Energy functionals and discrete norms at one sample time.
///
/// eta_tilde = v^T M v + u^T K_uu u + phi0^T K_phiphi phi0
/// eta       = |v|^2_L2 + |u|^2_L2 + |Bu|^2_L2 + |grad phi0|^2_L2
/// gamma     = 2 int_0^t v^T C_damp v
/// F_l = eta_tilde + gamma,  F_r = eta_tilde(0) + 2 int f.v - 2 int g_dot.phi0
struct EnergyRow {
  double t = 0.0;
  double kinetic = 0.0;
  double strain = 0.0;
  double electric = 0.0;
  double eta_tilde = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double work = 0.0;
  double F_l = 0.0;
  double F_r = 0.0;
  double norm_u_L2 = 0.0;
  double norm_Bu_L2 = 0.0;
  double norm_v_L2 = 0.0;
  double norm_Bv_L2 = 0.0;  // monitored for boundedness only
  double norm_phi_H1 = 0.0;

  [[nodiscard]] double residual() const noexcept { return F_l - F_r; }
};

struct EnergyReport {
  std::vector<EnergyRow> rows;
};

/// Running trapezoidal integrals between consecutive samples.
struct EnergyAccumulator {
  bool started = false;
  double t = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd phi0;
  double damping_rate = 0.0;  // 2 v^T C v at the previous sample
  double gamma = 0.0;
  double work = 0.0;
  double eta_tilde0 = 0.0;
};

/// Quadratic forms of the state plus accumulator update. Samples must be
/// passed in increasing time order.
EnergyRow sample_energies(const AssembledSystem& system, const State& state,
                          const Excitation& excitation, EnergyAccumulator& acc);

/// Observer-friendly wrapper that samples every state it is given.
class EnergyMonitor {
 public:
  EnergyMonitor(const AssembledSystem& system, const Excitation& excitation)
      : system_(&system), excitation_(&excitation) {}

  void operator()(const State& state) {
    report_.rows.push_back(sample_energies(*system_, state, *excitation_, acc_));
  }

  [[nodiscard]] const EnergyReport& report() const noexcept { return report_; }

 private:
  const AssembledSystem* system_;
  const Excitation* excitation_;
  EnergyAccumulator acc_;
  EnergyReport report_;
};

/// max_t |F_l - F_r| / max(1, max_t F_r).
double check_energy_identity(const EnergyReport& report);

struct ComponentDecay {
  double kinetic_ratio = 0.0;   // final / post-pulse maximum
  double strain_ratio = 0.0;
  double electric_ratio = 0.0;
  bool kinetic = false;
  bool strain = false;
  bool electric = false;
};

struct DecayVerdict {
  bool monotone = false;
  double limit = 0.0;            // eta_tilde(t_end)
  double eta_tilde_off = 0.0;    // eta_tilde at t0_off
  double eta_tilde_max = 0.0;    // over the whole run
  double max_increase = 0.0;     // largest step increase after t0_off
  ComponentDecay components;
};

/// Checks eta_tilde(t_{k+1}) <= eta_tilde(t_k) + slack * eta_tilde(t0_off)
/// for all samples at or after t0_off. Component decay compares each energy
/// part at t_end with its post-pulse maximum against `fraction`.
/// Throws PreconditionViolated unless t0_off is set and alpha, beta > 0.
DecayVerdict check_monotone_decay(const EnergyReport& report, std::optional<double> t0_off,
                                  double slack, double alpha, double beta, double fraction = 1e-2);

/// CSV header of the trajectory file.
inline constexpr const char* kTrajectoryCsvHeader =
    "t,norm_u_L2,norm_Bu_L2,norm_v_L2,norm_phi_H1,eta,eta_tilde,gamma,residual_energy";

std::string trajectory_csv_line(const EnergyRow& row);

}  // namespace piezo
