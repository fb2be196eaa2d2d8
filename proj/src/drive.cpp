#include "piezo/drive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "piezo/error.hpp"

namespace piezo {

TimeFunction::TimeFunction() : times_{0.0}, values_{0.0} {}

TimeFunction TimeFunction::constant(double value) {
  TimeFunction f;
  f.values_ = {value};
  return f;
}

TimeFunction TimeFunction::piecewise_linear(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size()) {
    throw Error(ErrorKind::ParseError, "drive table needs matching, nonempty time and value columns");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw Error(ErrorKind::ParseError, "drive table contains a non-finite entry");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw Error(ErrorKind::ParseError, "drive table times must be strictly increasing");
    }
  }
  TimeFunction f;
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

TimeFunction TimeFunction::analytic(std::function<double(double)> value,
                                    std::function<double(double)> rate) {
  TimeFunction f;
  f.times_.clear();
  f.values_.clear();
  f.value_fn_ = std::move(value);
  f.rate_fn_ = std::move(rate);
  return f;
}

double TimeFunction::value(double t) const {
  if (value_fn_) return value_fn_(t);
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return (1.0 - w) * values_[k] + w * values_[k + 1];
}

double TimeFunction::rate(double t, Side side) const {
  if (rate_fn_) return rate_fn_(t);
  if (times_.size() < 2) return 0.0;
  // Segment k spans [times_[k], times_[k+1]].
  std::size_t k = 0;
  if (side == Side::Right) {
    if (t < times_.front() || t >= times_.back()) return 0.0;
    k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin()) - 1;
  } else {
    if (t <= times_.front() || t > times_.back()) return 0.0;
    k = static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) - times_.begin()) - 1;
  }
  return (values_[k + 1] - values_[k]) / (times_[k + 1] - times_[k]);
}

TimeFunction TimeFunction::scaled(double s) const {
  if (value_fn_) {
    auto v = value_fn_;
    auto r = rate_fn_;
    return analytic([v, s](double t) { return s * v(t); }, [r, s](double t) { return s * r(t); });
  }
  TimeFunction f = *this;
  for (double& v : f.values_) v *= s;
  return f;
}

Drive Drive::zero() { return {TimeFunction(), 0.0}; }

Drive Drive::trapezoid(double amplitude, double t_rise, double t_hold, double t_fall) {
  if (!(t_rise > 0.0) || !(t_hold >= 0.0) || !(t_fall > 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorKind::ConfigError, "trapezoid pulse needs t_rise > 0, t_hold >= 0, t_fall > 0");
  }
  std::vector<double> t{0.0, t_rise};
  std::vector<double> v{0.0, amplitude};
  if (t_hold > 0.0) {
    t.push_back(t_rise + t_hold);
    v.push_back(amplitude);
  }
  t.push_back(t_rise + t_hold + t_fall);
  v.push_back(0.0);
  const double off = t.back();
  return {TimeFunction::piecewise_linear(std::move(t), std::move(v)), off};
}

Drive Drive::table(std::vector<double> times, std::vector<double> values) {
  Drive d;
  d.phi_e = TimeFunction::piecewise_linear(std::move(times), std::move(values));
  const auto& t = d.phi_e.breakpoints();
  const auto& v = d.phi_e.table_values();
  if (v.back() == 0.0) {
    std::size_t k = v.size() - 1;
    while (k > 0 && v[k - 1] == 0.0) --k;
    d.t0_off = t[k];
  }
  return d;
}

Drive Drive::scaled(double s) const { return {phi_e.scaled(s), t0_off}; }

Drive load_drive_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open drive table '" + path + "'");
  std::vector<double> t;
  std::vector<double> v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a)) continue;
    if (!(ls >> b) || (ls >> extra)) {
      throw Error(ErrorKind::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected two columns");
    }
    char* end_a = nullptr;
    char* end_b = nullptr;
    const double ta = std::strtod(a.c_str(), &end_a);
    const double vb = std::strtod(b.c_str(), &end_b);
    if (*end_a != '\0' || *end_b != '\0') {
      if (t.empty() && line_no == 1) continue;  // header
      throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": not a number");
    }
    t.push_back(ta);
    v.push_back(vb);
  }
  return Drive::table(std::move(t), std::move(v));
}

Eigen::VectorXd Excitation::f(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_u);
  for (const auto& term : terms) {
    if (term.f.size() == 0) continue;
    const double s = term.scale.value(t);
    if (s != 0.0) out += s * term.f;
  }
  return out;
}

Eigen::VectorXd Excitation::g(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_phi);
  for (const auto& term : terms) {
    if (term.g.size() == 0) continue;
    const double s = term.scale.value(t);
    if (s != 0.0) out += s * term.g;
  }
  return out;
}

Eigen::VectorXd Excitation::g_rate(double t, Side side) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_phi);
  for (const auto& term : terms) {
    if (term.g.size() == 0) continue;
    const double s = term.scale.rate(t, side);
    if (s != 0.0) out += s * term.g;
  }
  return out;
}

std::vector<double> Excitation::breakpoints() const {
  std::vector<double> out;
  for (const auto& term : terms) {
    if (term.scale.breakpoints().size() < 2) continue;
    out.insert(out.end(), term.scale.breakpoints().begin(), term.scale.breakpoints().end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Excitation Excitation::scaled(double s) const {
  Excitation out = *this;
  for (auto& term : out.terms) term.scale = term.scale.scaled(s);
  return out;
}

}  // namespace piezo
