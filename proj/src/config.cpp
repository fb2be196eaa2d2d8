#include "piezo/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ranges>
#include <sstream>

#include "piezo/drive.hpp"
#include "piezo/error.hpp"

namespace piezo {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  int line;
};

[[noreturn]] void fail(int line, const std::string& key, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line << ": " << key << ": " << what;
  throw Error(ErrorKind::ConfigError, msg.str());
}

double to_double(const Entry& e, const std::string& key) {
  const std::string_view s = trim(e.value);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail(e.line, key, "expected a number");
  if (!std::isfinite(v)) fail(e.line, key, "value must be finite");
  return v;
}

long long to_integer(const Entry& e, const std::string& key) {
  const std::string_view s = trim(e.value);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail(e.line, key, "expected an integer");
  return v;
}

bool to_bool(const Entry& e, const std::string& key) {
  const std::string_view s = trim(e.value);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(e.line, key, "expected true or false");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

BoundaryTag to_tag(const Entry& e, const std::string& key) {
  try {
    return parse_boundary_tag(trim(e.value));
  } catch (const Error&) {
    fail(e.line, key, "expected electrode, ground or remaining");
  }
}

std::string resolve(const std::string& base, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  std::map<std::string, Entry> entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, std::string(line), "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "[]", "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, std::string(line), "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) fail(line_no, "(empty)", "missing key");
    const std::string full = (section.empty() || key.find('.') != std::string::npos)
                                 ? key
                                 : section + "." + key;
    if (entries.count(full)) fail(line_no, full, "duplicate key");
    entries[full] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }

  RunConfig cfg;
  bool have_dt = false;
  bool have_t_end = false;
  const auto num = [&](double& dst) {
    return [&dst](const Entry& e, const std::string& k) { dst = to_double(e, k); };
  };
  const auto positive_int = [](int& dst) {
    return [&dst](const Entry& e, const std::string& k) {
      const long long v = to_integer(e, k);
      if (v < 1 || v > 1'000'000) fail(e.line, k, "must be a positive integer");
      dst = static_cast<int>(v);
    };
  };
  const auto count = [](std::size_t& dst) {
    return [&dst](const Entry& e, const std::string& k) {
      const long long v = to_integer(e, k);
      if (v < 0) fail(e.line, k, "must be nonnegative");
      dst = static_cast<std::size_t>(v);
    };
  };
  const std::map<std::string, double MaterialParams::*> material_keys{
      {"c11", &MaterialParams::c11},     {"c12", &MaterialParams::c12},
      {"c13", &MaterialParams::c13},     {"c33", &MaterialParams::c33},
      {"c44", &MaterialParams::c44},     {"e13", &MaterialParams::e13},
      {"e15", &MaterialParams::e15},     {"e33", &MaterialParams::e33},
      {"eps11", &MaterialParams::eps11}, {"eps33", &MaterialParams::eps33},
      {"rho", &MaterialParams::rho},     {"alpha", &MaterialParams::alpha},
      {"beta", &MaterialParams::beta}};
  std::map<std::string, double> overrides;

  using Handler = std::function<void(const Entry&, const std::string&)>;
  std::map<std::string, Handler> handlers{
      {"mesh.source",
       [&](const Entry& e, const std::string& k) {
         const auto v = trim(e.value);
         if (v == "generate") cfg.mesh.source = MeshSpec::Source::Generate;
         else if (v == "file") cfg.mesh.source = MeshSpec::Source::File;
         else fail(e.line, k, "expected generate or file");
       }},
      {"mesh.path", [&](const Entry& e, const std::string&) { cfg.mesh.path = e.value; }},
      {"mesh.nx", positive_int(cfg.mesh.nx)},
      {"mesh.ny", positive_int(cfg.mesh.ny)},
      {"mesh.lx", num(cfg.mesh.lx)},
      {"mesh.ly", num(cfg.mesh.ly)},
      {"mesh.top", [&](const Entry& e, const std::string& k) { cfg.mesh.tags.top = to_tag(e, k); }},
      {"mesh.bottom", [&](const Entry& e, const std::string& k) { cfg.mesh.tags.bottom = to_tag(e, k); }},
      {"mesh.left", [&](const Entry& e, const std::string& k) { cfg.mesh.tags.left = to_tag(e, k); }},
      {"mesh.right", [&](const Entry& e, const std::string& k) { cfg.mesh.tags.right = to_tag(e, k); }},
      {"material.preset",
       [&](const Entry& e, const std::string& k) {
         const auto v = trim(e.value);
         if (v != "pzt5a" && v != "identity") fail(e.line, k, "expected pzt5a or identity");
         cfg.material_preset = std::string(v);
       }},
      {"drive.kind",
       [&](const Entry& e, const std::string& k) {
         const auto v = trim(e.value);
         if (v == "zero") cfg.drive.kind = DriveSpec::Kind::Zero;
         else if (v == "trapezoid") cfg.drive.kind = DriveSpec::Kind::Trapezoid;
         else if (v == "table") cfg.drive.kind = DriveSpec::Kind::Table;
         else fail(e.line, k, "expected zero, trapezoid or table");
       }},
      {"drive.amplitude", num(cfg.drive.amplitude)},
      {"drive.t_rise", num(cfg.drive.t_rise)},
      {"drive.t_hold", num(cfg.drive.t_hold)},
      {"drive.t_fall", num(cfg.drive.t_fall)},
      {"drive.path", [&](const Entry& e, const std::string&) { cfg.drive.path = e.value; }},
      {"time.dt",
       [&](const Entry& e, const std::string& k) {
         cfg.dt = to_double(e, k);
         have_dt = true;
         if (!(cfg.dt > 0.0)) fail(e.line, k, "dt must be positive");
       }},
      {"time.t_end",
       [&](const Entry& e, const std::string& k) {
         cfg.t_end = to_double(e, k);
         have_t_end = true;
         if (!(cfg.t_end >= 0.0)) fail(e.line, k, "t_end must be nonnegative");
       }},
      {"time.alpha_h",
       [&](const Entry& e, const std::string& k) {
         cfg.alpha_h = to_double(e, k);
         if (!(cfg.alpha_h >= -1.0 / 3.0 - 1e-15 && cfg.alpha_h <= 0.0)) {
           fail(e.line, k, "alpha_h must lie in [-1/3, 0]");
         }
       }},
      {"output.directory", [&](const Entry& e, const std::string&) { cfg.output_dir = e.value; }},
      {"output.stride",
       [&](const Entry& e, const std::string& k) {
         count(cfg.stride)(e, k);
         if (cfg.stride == 0) fail(e.line, k, "stride must be positive");
       }},
      {"output.snapshot_stride", count(cfg.snapshot_stride)},
      {"run.threads",
       [&](const Entry& e, const std::string& k) {
         const long long v = to_integer(e, k);
         if (v < 0 || v > 4096) fail(e.line, k, "threads must be in [0, 4096]");
         cfg.threads = static_cast<int>(v);
       }},
      {"energy.check_decay",
       [&](const Entry& e, const std::string& k) { cfg.energy.check_decay = to_bool(e, k); }},
      {"energy.slack", num(cfg.energy.slack)},
      {"energy.decay_fraction", num(cfg.energy.decay_fraction)},
      {"verify.levels",
       [&](const Entry& e, const std::string& k) {
         cfg.verify.levels.clear();
         for (const auto& item : split_list(e.value)) {
           int v = 0;
           positive_int(v)(Entry{item, e.line}, k);
           cfg.verify.levels.push_back(v);
         }
         if (cfg.verify.levels.empty()) fail(e.line, k, "expected a comma-separated list");
       }},
      {"verify.samples", positive_int(cfg.verify.samples)},
      {"verify.seed",
       [&](const Entry& e, const std::string& k) {
         const long long v = to_integer(e, k);
         if (v < 0) fail(e.line, k, "seed must be nonnegative");
         cfg.verify.seed = static_cast<std::uint64_t>(v);
       }},
      {"verify.scale_factors",
       [&](const Entry& e, const std::string& k) {
         cfg.verify.scale_factors.clear();
         for (const auto& item : split_list(e.value)) {
           cfg.verify.scale_factors.push_back(to_double(Entry{item, e.line}, k));
         }
         if (cfg.verify.scale_factors.empty()) fail(e.line, k, "expected a comma-separated list");
       }},
      {"verify.mms_case",
       [&](const Entry& e, const std::string& k) {
         const auto v = trim(e.value);
         if (v == "constant") cfg.verify.mms_case = ManufacturedKind::Constant;
         else if (v == "affine") cfg.verify.mms_case = ManufacturedKind::Affine;
         else if (v == "quadratic") cfg.verify.mms_case = ManufacturedKind::Quadratic;
         else fail(e.line, k, "expected constant, affine or quadratic");
       }},
      {"verify.mms_t_end", num(cfg.verify.mms_t_end)},
      {"verify.mms_dt_per_h", num(cfg.verify.mms_dt_per_h)},
      {"verify.oracle_rtol", num(cfg.verify.oracle_rtol)},
      {"verify.oracle_tolerance", num(cfg.verify.oracle_tolerance)},
      {"verify.tolerance", num(cfg.verify.tolerance)},
  };
  for (const auto& name : material_keys | std::views::keys) {
    handlers["material." + name] = [&overrides, name = name](const Entry& e, const std::string& k) {
      overrides[name] = to_double(e, k);
    };
  }

  for (const auto& [key, entry] : entries) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) fail(entry.line, key, "unknown key");
    it->second(entry, key);
  }

  const auto line_of = [&](const std::string& key) {
    const auto it = entries.find(key);
    return it == entries.end() ? 0 : it->second.line;
  };
  if (!have_dt) fail(0, "time.dt", "required key missing");
  if (!have_t_end) fail(0, "time.t_end", "required key missing");

  cfg.material = cfg.material_preset == "identity" ? identity_like_params() : pzt5a_params();
  for (const auto& [name, value] : overrides) cfg.material.*material_keys.at(name) = value;

  if (cfg.mesh.source == MeshSpec::Source::File) {
    if (cfg.mesh.path.empty()) fail(line_of("mesh.source"), "mesh.path", "required for source = file");
    cfg.mesh.path = resolve(base_dir, cfg.mesh.path);
    if (!fs::exists(cfg.mesh.path)) {
      throw Error(ErrorKind::ParseError, "mesh file '" + cfg.mesh.path + "' does not exist");
    }
  } else if (!(cfg.mesh.lx > 0.0) || !(cfg.mesh.ly > 0.0)) {
    fail(line_of("mesh.lx"), "mesh.lx/ly", "rectangle sides must be positive");
  }

  switch (cfg.drive.kind) {
    case DriveSpec::Kind::Zero:
      break;
    case DriveSpec::Kind::Trapezoid:
      if (!(cfg.drive.t_rise > 0.0) || !(cfg.drive.t_hold >= 0.0) || !(cfg.drive.t_fall > 0.0)) {
        fail(line_of("drive.kind"), "drive", "trapezoid needs t_rise > 0, t_hold >= 0, t_fall > 0");
      }
      break;
    case DriveSpec::Kind::Table:
      if (cfg.drive.path.empty()) fail(line_of("drive.kind"), "drive.path", "required for kind = table");
      cfg.drive.path = resolve(base_dir, cfg.drive.path);
      if (!fs::exists(cfg.drive.path)) {
        throw Error(ErrorKind::ParseError, "drive table '" + cfg.drive.path + "' does not exist");
      }
      break;
  }

  if (!(cfg.energy.slack >= 0.0)) fail(line_of("energy.slack"), "energy.slack", "must be nonnegative");
  if (!(cfg.energy.decay_fraction > 0.0)) {
    fail(line_of("energy.decay_fraction"), "energy.decay_fraction", "must be positive");
  }
  if (cfg.energy.check_decay) {
    if (cfg.drive.kind == DriveSpec::Kind::Trapezoid) {
      const double off = cfg.drive.t_rise + cfg.drive.t_hold + cfg.drive.t_fall;
      if (off > cfg.t_end) {
        fail(line_of("energy.check_decay"), "energy.check_decay", "pulse must end before t_end");
      }
    } else if (cfg.drive.kind == DriveSpec::Kind::Table) {
      const Drive d = load_drive_table(cfg.drive.path);
      if (!d.t0_off || *d.t0_off > cfg.t_end) {
        fail(line_of("energy.check_decay"), "energy.check_decay",
             "drive table must return to zero before t_end");
      }
    }
  }
  if (!(cfg.verify.mms_t_end > 0.0) || !(cfg.verify.mms_dt_per_h > 0.0)) {
    fail(line_of("verify.mms_t_end"), "verify.mms_*", "must be positive");
  }
  if (!(cfg.verify.oracle_rtol > 0.0) || !(cfg.verify.oracle_tolerance > 0.0) ||
      !(cfg.verify.tolerance > 0.0)) {
    fail(line_of("verify.tolerance"), "verify tolerances", "must be positive");
  }
  cfg.output_dir = resolve(base_dir, cfg.output_dir);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(text.str(), parent.empty() ? std::string(".") : parent.string());
}

}  // namespace piezo
