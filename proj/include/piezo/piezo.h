/* C interface of the piezo library. All handles are opaque; every function
 * returning piezo_status leaves a message retrievable with piezo_last_error()
 * (thread-local) when it fails. */
#ifndef PIEZO_PIEZO_H
#define PIEZO_PIEZO_H

#include <stddef.h>

#if defined(PIEZO_BUILDING_LIBRARY)
#define PIEZO_API __attribute__((visibility("default")))
#else
#define PIEZO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum piezo_status {
  PIEZO_OK = 0,
  PIEZO_ERR_INVALID_SCALAR,
  PIEZO_ERR_NON_POSITIVE_DEFINITE,
  PIEZO_ERR_PARSE,
  PIEZO_ERR_TOPOLOGY,
  PIEZO_ERR_INVALID_DIMENSION,
  PIEZO_ERR_DEGENERATE_CELL,
  PIEZO_ERR_SINGULAR_LIFT,
  PIEZO_ERR_SOLVE_FAILURE,
  PIEZO_ERR_NON_FINITE_STATE,
  PIEZO_ERR_DIMENSION_MISMATCH,
  PIEZO_ERR_PRECONDITION,
  PIEZO_ERR_TOO_LARGE,
  PIEZO_ERR_STIFFNESS,
  PIEZO_ERR_RATE_FAILURE,
  PIEZO_ERR_COERCIVITY,
  PIEZO_ERR_CONFIG,
  PIEZO_ERR_IO,
  PIEZO_ERR_INVALID_ARGUMENT, /* null handle or pointer */
  PIEZO_ERR_INTERNAL
} piezo_status;

typedef struct piezo_mesh piezo_mesh;
typedef struct piezo_material piezo_material;
typedef struct piezo_system piezo_system;
typedef struct piezo_simulation piezo_simulation;
typedef struct piezo_config piezo_config;

/* Kind name as used in diagnostics, e.g. "ParseError". */
PIEZO_API const char* piezo_status_name(piezo_status status);
/* Message of the last failed call on this thread ("" if none). */
PIEZO_API const char* piezo_last_error(void);
/* 0 ok, 1 verification failure, 2 input error, 3 internal error. */
PIEZO_API int piezo_exit_code(piezo_status status);
PIEZO_API const char* piezo_version(void);

/* ---- materials ---------------------------------------------------------- */

typedef struct piezo_material_params {
  double c11, c12, c13, c33, c44;
  double e13, e15, e33;
  double eps11, eps33;
  double rho;
  double alpha, beta;
} piezo_material_params;

/* preset: "pzt5a" or "identity". */
PIEZO_API piezo_status piezo_material_preset(const char* preset, piezo_material_params* out);
PIEZO_API piezo_status piezo_material_create(const piezo_material_params* params,
                                             piezo_material** out);
PIEZO_API piezo_status piezo_material_eigenvalues(const piezo_material* material,
                                                  double* lambda_mech, double* lambda_elec);
PIEZO_API void piezo_material_free(piezo_material* material);

/* ---- mesh ---------------------------------------------------------------- */

typedef struct piezo_mesh_info {
  int dim;
  size_t nodes;
  size_t cells;
  size_t boundary_facets;
  size_t electrode_nodes;
  size_t ground_nodes;
} piezo_mesh_info;

PIEZO_API piezo_status piezo_mesh_load(const char* path, piezo_mesh** out);
/* Electrode on top (y = ly), ground on the bottom, remaining sides free. */
PIEZO_API piezo_status piezo_mesh_generate_rect(int nx, int ny, double lx, double ly,
                                                piezo_mesh** out);
PIEZO_API piezo_status piezo_mesh_save(const piezo_mesh* mesh, const char* path);
PIEZO_API piezo_status piezo_mesh_info_get(const piezo_mesh* mesh, piezo_mesh_info* out);
PIEZO_API void piezo_mesh_free(piezo_mesh* mesh);

/* ---- assembled system ------------------------------------------------------ */

/* threads = 0 uses PIEZO_THREADS or the hardware concurrency. */
PIEZO_API piezo_status piezo_system_assemble(const piezo_mesh* mesh, const piezo_material* material,
                                             int threads, piezo_system** out);
PIEZO_API piezo_status piezo_system_sizes(const piezo_system* system, size_t* n_u, size_t* n_phi,
                                          size_t* n_free);
/* Writes M, K_uu, C_damp, K_uphi, K_phiphi triplets and the lift vectors. */
PIEZO_API piezo_status piezo_system_dump(const piezo_system* system, const char* directory);
PIEZO_API void piezo_system_free(piezo_system* system);

/* ---- time integration -------------------------------------------------------- */

typedef enum piezo_drive_kind {
  PIEZO_DRIVE_ZERO = 0,
  PIEZO_DRIVE_TRAPEZOID = 1,
  PIEZO_DRIVE_TABLE = 2
} piezo_drive_kind;

typedef struct piezo_drive_spec {
  piezo_drive_kind kind;
  double amplitude, t_rise, t_hold, t_fall; /* trapezoid */
  const double* times;                      /* table */
  const double* values;
  size_t count;
} piezo_drive_spec;

typedef struct piezo_energy {
  double t;
  double eta_tilde;
  double eta;
  double gamma;
  double F_l;
  double F_r;
  double residual;
} piezo_energy;

/* The simulation keeps its own copy of the system. Initial data are zero
 * until piezo_simulation_set_initial is called. */
PIEZO_API piezo_status piezo_simulation_create(const piezo_system* system,
                                               const piezo_drive_spec* drive, double dt,
                                               double alpha_h, piezo_simulation** out);
PIEZO_API piezo_status piezo_simulation_set_initial(piezo_simulation* sim, const double* u0,
                                                    const double* u1, size_t n_u);
PIEZO_API piezo_status piezo_simulation_step(piezo_simulation* sim, size_t n_steps);
/* Any output pointer may be NULL; u and v need n_u entries, phi0 n_phi. */
PIEZO_API piezo_status piezo_simulation_state(const piezo_simulation* sim, double* t, double* u,
                                              double* v, double* phi0);
PIEZO_API piezo_status piezo_simulation_energy(const piezo_simulation* sim, piezo_energy* out);
PIEZO_API void piezo_simulation_free(piezo_simulation* sim);

/* ---- config-driven commands --------------------------------------------------- */

PIEZO_API piezo_status piezo_config_load(const char* path, piezo_config** out);
PIEZO_API void piezo_config_free(piezo_config* config);

/* passed (may be NULL) is 0 when a requested decay check fails. */
PIEZO_API piezo_status piezo_run_simulate(const piezo_config* config, int* passed);
/* json_out (may be NULL) receives the report; release it with piezo_string_free. */
PIEZO_API piezo_status piezo_run_verify(const piezo_config* config, const char* study,
                                        char** json_out, int* passed);
/* path_out (may be NULL) receives the written path; release with piezo_string_free. */
PIEZO_API piezo_status piezo_run_mesh_gen(const piezo_config* config, char** path_out);
PIEZO_API piezo_status piezo_run_dump_system(const piezo_config* config, char** path_out);
PIEZO_API void piezo_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
