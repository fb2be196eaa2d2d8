#include "piezo/piezo.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "piezo/app.hpp"
#include "piezo/assembly.hpp"
#include "piezo/config.hpp"
#include "piezo/energy.hpp"
#include "piezo/error.hpp"
#include "piezo/materials.hpp"
#include "piezo/mesh.hpp"
#include "piezo/timeint.hpp"

struct piezo_mesh {
  piezo::Mesh mesh;
};

struct piezo_material {
  piezo::MaterialSet material;
};

struct piezo_system {
  piezo::AssembledSystem system;
};

struct piezo_simulation {
  piezo::AssembledSystem system;
  piezo::SemiDiscreteSystem sys;
  piezo::Drive drive;
  piezo::Excitation excitation;
  std::optional<piezo::HhtIntegrator> integrator;
  piezo::State state;
  piezo::EnergyAccumulator acc;
  piezo::EnergyRow energy;
  double dt = 0.0;
  std::size_t step = 0;
};

struct piezo_config {
  piezo::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

piezo_status to_status(piezo::ErrorKind kind) {
  using piezo::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidScalar: return PIEZO_ERR_INVALID_SCALAR;
    case ErrorKind::NonPositiveDefinite: return PIEZO_ERR_NON_POSITIVE_DEFINITE;
    case ErrorKind::ParseError: return PIEZO_ERR_PARSE;
    case ErrorKind::TopologyError: return PIEZO_ERR_TOPOLOGY;
    case ErrorKind::InvalidDimension: return PIEZO_ERR_INVALID_DIMENSION;
    case ErrorKind::DegenerateCell: return PIEZO_ERR_DEGENERATE_CELL;
    case ErrorKind::SingularLift: return PIEZO_ERR_SINGULAR_LIFT;
    case ErrorKind::SolveFailure: return PIEZO_ERR_SOLVE_FAILURE;
    case ErrorKind::NonFiniteState: return PIEZO_ERR_NON_FINITE_STATE;
    case ErrorKind::DimensionMismatch: return PIEZO_ERR_DIMENSION_MISMATCH;
    case ErrorKind::PreconditionViolated: return PIEZO_ERR_PRECONDITION;
    case ErrorKind::TooLarge: return PIEZO_ERR_TOO_LARGE;
    case ErrorKind::StiffnessFailure: return PIEZO_ERR_STIFFNESS;
    case ErrorKind::RateFailure: return PIEZO_ERR_RATE_FAILURE;
    case ErrorKind::CoercivityViolation: return PIEZO_ERR_COERCIVITY;
    case ErrorKind::ConfigError: return PIEZO_ERR_CONFIG;
    case ErrorKind::IoError: return PIEZO_ERR_IO;
  }
  return PIEZO_ERR_INTERNAL;
}

template <typename F>
piezo_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return PIEZO_OK;
  } catch (const piezo::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PIEZO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PIEZO_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PIEZO_ERR_INTERNAL;
  }
}

piezo_status invalid(const char* what) {
  g_last_error = what;
  return PIEZO_ERR_INVALID_ARGUMENT;
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

piezo::MaterialParams from_c(const piezo_material_params& p) {
  return {p.c11, p.c12, p.c13, p.c33, p.c44, p.e13, p.e15, p.e33,
          p.eps11, p.eps33, p.rho, p.alpha, p.beta};
}

piezo_material_params to_c(const piezo::MaterialParams& p) {
  return {p.c11, p.c12, p.c13, p.c33, p.c44, p.e13, p.e15, p.e33,
          p.eps11, p.eps33, p.rho, p.alpha, p.beta};
}

piezo::Drive drive_from_c(const piezo_drive_spec* spec) {
  if (!spec || spec->kind == PIEZO_DRIVE_ZERO) return piezo::Drive::zero();
  if (spec->kind == PIEZO_DRIVE_TRAPEZOID) {
    return piezo::Drive::trapezoid(spec->amplitude, spec->t_rise, spec->t_hold, spec->t_fall);
  }
  if (spec->kind == PIEZO_DRIVE_TABLE) {
    if (!spec->times || !spec->values || spec->count == 0) {
      throw piezo::Error(piezo::ErrorKind::ConfigError, "drive table needs times and values");
    }
    return piezo::Drive::table(std::vector<double>(spec->times, spec->times + spec->count),
                               std::vector<double>(spec->values, spec->values + spec->count));
  }
  throw piezo::Error(piezo::ErrorKind::ConfigError, "unknown drive kind");
}

void record_energy(piezo_simulation& sim) {
  sim.energy = piezo::sample_energies(sim.system, sim.state, sim.excitation, sim.acc);
}

}  // namespace

extern "C" {

const char* piezo_status_name(piezo_status status) {
  switch (status) {
    case PIEZO_OK: return "Ok";
    case PIEZO_ERR_INVALID_SCALAR: return "InvalidScalar";
    case PIEZO_ERR_NON_POSITIVE_DEFINITE: return "NonPositiveDefinite";
    case PIEZO_ERR_PARSE: return "ParseError";
    case PIEZO_ERR_TOPOLOGY: return "TopologyError";
    case PIEZO_ERR_INVALID_DIMENSION: return "InvalidDimension";
    case PIEZO_ERR_DEGENERATE_CELL: return "DegenerateCell";
    case PIEZO_ERR_SINGULAR_LIFT: return "SingularLift";
    case PIEZO_ERR_SOLVE_FAILURE: return "SolveFailure";
    case PIEZO_ERR_NON_FINITE_STATE: return "NonFiniteState";
    case PIEZO_ERR_DIMENSION_MISMATCH: return "DimensionMismatch";
    case PIEZO_ERR_PRECONDITION: return "PreconditionViolated";
    case PIEZO_ERR_TOO_LARGE: return "TooLarge";
    case PIEZO_ERR_STIFFNESS: return "StiffnessFailure";
    case PIEZO_ERR_RATE_FAILURE: return "RateFailure";
    case PIEZO_ERR_COERCIVITY: return "CoercivityViolation";
    case PIEZO_ERR_CONFIG: return "ConfigError";
    case PIEZO_ERR_IO: return "IoError";
    case PIEZO_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case PIEZO_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* piezo_last_error(void) { return g_last_error.c_str(); }

int piezo_exit_code(piezo_status status) {
  switch (status) {
    case PIEZO_OK: return 0;
    case PIEZO_ERR_RATE_FAILURE:
    case PIEZO_ERR_COERCIVITY: return 1;
    case PIEZO_ERR_SOLVE_FAILURE:
    case PIEZO_ERR_SINGULAR_LIFT:
    case PIEZO_ERR_NON_FINITE_STATE:
    case PIEZO_ERR_STIFFNESS:
    case PIEZO_ERR_INTERNAL: return 3;
    default: return 2;
  }
}

const char* piezo_version(void) { return "0.1.0"; }

piezo_status piezo_material_preset(const char* preset, piezo_material_params* out) {
  if (!preset || !out) return invalid("null argument");
  return guarded([&] {
    const std::string p(preset);
    if (p == "pzt5a") *out = to_c(piezo::pzt5a_params());
    else if (p == "identity") *out = to_c(piezo::identity_like_params());
    else throw piezo::Error(piezo::ErrorKind::ConfigError, "unknown material preset '" + p + "'");
  });
}

piezo_status piezo_material_create(const piezo_material_params* params, piezo_material** out) {
  if (!params || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new piezo_material{piezo::build_material(from_c(*params))}; });
}

piezo_status piezo_material_eigenvalues(const piezo_material* material, double* lambda_mech,
                                        double* lambda_elec) {
  if (!material) return invalid("null material");
  return guarded([&] {
    const auto b = piezo::smallest_eigenvalues(material->material);
    if (lambda_mech) *lambda_mech = b.lambda_mech;
    if (lambda_elec) *lambda_elec = b.lambda_elec;
  });
}

void piezo_material_free(piezo_material* material) { delete material; }

piezo_status piezo_mesh_load(const char* path, piezo_mesh** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new piezo_mesh{piezo::load_mesh(path)}; });
}

piezo_status piezo_mesh_generate_rect(int nx, int ny, double lx, double ly, piezo_mesh** out) {
  if (!out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new piezo_mesh{piezo::generate_rect(nx, ny, lx, ly)}; });
}

piezo_status piezo_mesh_save(const piezo_mesh* mesh, const char* path) {
  if (!mesh || !path) return invalid("null argument");
  return guarded([&] { piezo::save_mesh(mesh->mesh, path); });
}

piezo_status piezo_mesh_info_get(const piezo_mesh* mesh, piezo_mesh_info* out) {
  if (!mesh || !out) return invalid("null argument");
  return guarded([&] {
    const piezo::DofMap d = piezo::build_dofmap(mesh->mesh);
    out->dim = mesh->mesh.dim();
    out->nodes = mesh->mesh.node_count();
    out->cells = mesh->mesh.cell_count();
    out->boundary_facets = mesh->mesh.boundary_facets().size();
    out->electrode_nodes = d.electrode_nodes.size();
    out->ground_nodes = d.ground_nodes.size();
  });
}

void piezo_mesh_free(piezo_mesh* mesh) { delete mesh; }

piezo_status piezo_system_assemble(const piezo_mesh* mesh, const piezo_material* material,
                                   int threads, piezo_system** out) {
  if (!mesh || !material || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    const piezo::DofMap d = piezo::build_dofmap(mesh->mesh);
    *out = new piezo_system{
        piezo::assemble(mesh->mesh, d, material->material, piezo::AssemblyOptions{threads})};
  });
}

piezo_status piezo_system_sizes(const piezo_system* system, size_t* n_u, size_t* n_phi,
                                size_t* n_free) {
  if (!system) return invalid("null system");
  const auto& d = system->system.dofmap;
  if (n_u) *n_u = static_cast<size_t>(d.n_u);
  if (n_phi) *n_phi = static_cast<size_t>(d.n_phi);
  if (n_free) *n_free = static_cast<size_t>(d.n_free());
  g_last_error.clear();
  return PIEZO_OK;
}

piezo_status piezo_system_dump(const piezo_system* system, const char* directory) {
  if (!system || !directory) return invalid("null argument");
  return guarded([&] { piezo::dump_system(system->system, directory); });
}

void piezo_system_free(piezo_system* system) { delete system; }

piezo_status piezo_simulation_create(const piezo_system* system, const piezo_drive_spec* drive,
                                     double dt, double alpha_h, piezo_simulation** out) {
  if (!system || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto sim = std::make_unique<piezo_simulation>();
    sim->system = system->system;
    sim->sys = piezo::semi_discrete(sim->system);
    sim->drive = drive_from_c(drive);
    sim->excitation = piezo::drive_excitation(sim->system, sim->drive);
    sim->dt = dt;
    sim->integrator.emplace(sim->sys, sim->excitation, dt, piezo::HhtParams{alpha_h});
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sim->system.dofmap.n_u);
    sim->state = sim->integrator->initialize(zero, zero);
    record_energy(*sim);
    *out = sim.release();
  });
}

piezo_status piezo_simulation_set_initial(piezo_simulation* sim, const double* u0, const double* u1,
                                          size_t n_u) {
  if (!sim || !u0 || !u1) return invalid("null argument");
  return guarded([&] {
    if (n_u != static_cast<size_t>(sim->system.dofmap.n_u)) {
      throw piezo::Error(piezo::ErrorKind::DimensionMismatch, "initial data have the wrong length");
    }
    const auto n = static_cast<Eigen::Index>(n_u);
    const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(u0, n);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(u1, n);
    sim->state = sim->integrator->initialize(a, b);
    sim->step = 0;
    sim->acc = piezo::EnergyAccumulator{};
    record_energy(*sim);
  });
}

piezo_status piezo_simulation_step(piezo_simulation* sim, size_t n_steps) {
  if (!sim) return invalid("null simulation");
  return guarded([&] {
    for (size_t i = 0; i < n_steps; ++i) {
      piezo::State next = sim->integrator->step(sim->state);
      ++sim->step;
      next.t = static_cast<double>(sim->step) * sim->dt;
      sim->state = std::move(next);
      record_energy(*sim);
    }
  });
}

piezo_status piezo_simulation_state(const piezo_simulation* sim, double* t, double* u, double* v,
                                    double* phi0) {
  if (!sim) return invalid("null simulation");
  const auto& s = sim->state;
  if (t) *t = s.t;
  if (u) Eigen::Map<Eigen::VectorXd>(u, s.u.size()) = s.u;
  if (v) Eigen::Map<Eigen::VectorXd>(v, s.v.size()) = s.v;
  if (phi0) Eigen::Map<Eigen::VectorXd>(phi0, s.phi0.size()) = s.phi0;
  g_last_error.clear();
  return PIEZO_OK;
}

piezo_status piezo_simulation_energy(const piezo_simulation* sim, piezo_energy* out) {
  if (!sim || !out) return invalid("null argument");
  const auto& e = sim->energy;
  *out = piezo_energy{e.t, e.eta_tilde, e.eta, e.gamma, e.F_l, e.F_r, e.residual()};
  g_last_error.clear();
  return PIEZO_OK;
}

void piezo_simulation_free(piezo_simulation* sim) { delete sim; }

piezo_status piezo_config_load(const char* path, piezo_config** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new piezo_config{piezo::load_config(path)}; });
}

void piezo_config_free(piezo_config* config) { delete config; }

piezo_status piezo_run_simulate(const piezo_config* config, int* passed) {
  if (!config) return invalid("null config");
  return guarded([&] {
    const auto r = piezo::cmd_simulate(config->config);
    if (passed) *passed = r.passed ? 1 : 0;
  });
}

piezo_status piezo_run_verify(const piezo_config* config, const char* study, char** json_out,
                              int* passed) {
  if (!config || !study) return invalid("null argument");
  if (json_out) *json_out = nullptr;
  return guarded([&] {
    const auto r = piezo::cmd_verify(config->config, study);
    if (passed) *passed = r.passed ? 1 : 0;
    if (json_out) *json_out = duplicate(r.json);
  });
}

piezo_status piezo_run_mesh_gen(const piezo_config* config, char** path_out) {
  if (!config) return invalid("null config");
  if (path_out) *path_out = nullptr;
  return guarded([&] {
    const std::string p = piezo::cmd_mesh_gen(config->config);
    if (path_out) *path_out = duplicate(p);
  });
}

piezo_status piezo_run_dump_system(const piezo_config* config, char** path_out) {
  if (!config) return invalid("null config");
  if (path_out) *path_out = nullptr;
  return guarded([&] {
    const std::string p = piezo::cmd_dump_system(config->config);
    if (path_out) *path_out = duplicate(p);
  });
}

void piezo_string_free(char* s) { std::free(s); }

}  // extern "C"
