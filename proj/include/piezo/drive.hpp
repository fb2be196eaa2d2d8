#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace piezo {

/// Which one-sided limit to use for the derivative at a kink.
enum class Side { Left, Right };

/// Scalar function of time with an exact derivative: either a piecewise-linear
/// table (held constant outside its range) or a closed-form pair.
class TimeFunction {
 public:
  TimeFunction();  // identically zero

  static TimeFunction constant(double value);
  static TimeFunction piecewise_linear(std::vector<double> times, std::vector<double> values);
  static TimeFunction analytic(std::function<double(double)> value,
                               std::function<double(double)> rate);

  [[nodiscard]] double value(double t) const;
  [[nodiscard]] double rate(double t, Side side = Side::Right) const;

  /// Times where the derivative may jump (table abscissae); empty otherwise.
  [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return times_; }
  [[nodiscard]] bool is_table() const noexcept { return !value_fn_; }
  [[nodiscard]] const std::vector<double>& table_values() const noexcept { return values_; }

  [[nodiscard]] TimeFunction scaled(double s) const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::function<double(double)> value_fn_;
  std::function<double(double)> rate_fn_;
};

/// Electrode potential phi_e(t) [V]. When t0_off is set, phi_e vanishes for
/// all t >= t0_off.
struct Drive {
  TimeFunction phi_e;
  std::optional<double> t0_off;

  static Drive zero();
  /// Ramp up over t_rise, hold, ramp down over t_fall; t0_off is the end of
  /// the fall.
  static Drive trapezoid(double amplitude, double t_rise, double t_hold, double t_fall);
  /// Piecewise-linear table. t0_off is the first sample after which every
  /// sample is zero; unset if the last sample is nonzero.
  static Drive table(std::vector<double> times, std::vector<double> values);

  [[nodiscard]] Drive scaled(double s) const;
};

/// Reads a two-column CSV (t, phi_e) with an optional header line.
Drive load_drive_table(const std::string& path);

/// One separable load contribution theta(t) * (f, g): f enters the momentum
/// equation (n_u entries), g the charge equation (n_phi entries).
struct LoadTerm {
  TimeFunction scale;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

/// Right-hand sides f(t) and g(t) as a sum of separable terms.
struct Excitation {
  int n_u = 0;
  int n_phi = 0;
  std::vector<LoadTerm> terms;
  std::optional<double> t0_off;

  [[nodiscard]] Eigen::VectorXd f(double t) const;
  [[nodiscard]] Eigen::VectorXd g(double t) const;
  [[nodiscard]] Eigen::VectorXd g_rate(double t, Side side = Side::Right) const;
  /// Sorted union of all term breakpoints.
  [[nodiscard]] std::vector<double> breakpoints() const;

  [[nodiscard]] Excitation scaled(double s) const;
};

}  // namespace piezo
