/**
 * @file cli_io.hpp
 * @brief Run configuration, output files and the subcommands of the command-line tool.
 *
 * Configurations are JSON. M, a, s and k are required at the top level; every other
 * field has a default and unknown keys are errors. The fully defaulted configuration
 * is echoed into each run manifest, and a manifest is itself accepted as a configuration.
 *
 * CSV schemas:
 *   decay.csv      t,sup_abs_phi
 *   snapshots.csv  t,u,theta,re_phi,im_phi
 *   compare.csv    t,relative_l2
 *   geometry.csv   r,delta,u
 *   potential.csv  u,re_v,im_v
 *   kernel.csv     u,re_s,im_s
 *   enclosure.csv  u,re_center,im_center,radius,abs_defect
 * Numbers are written with 17 significant digits.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kerrstab/propagator.hpp"
#include "kerrstab/timedomain_oracle.hpp"

namespace kerr {

inline constexpr const char* kCodeVersion = "kerrstab 0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  double M = 0.0, a = 0.0, s = 0.0, k = 0.0;

  struct Grid {
    double u_min = -15.0, u_max = 15.0;
    int n_u = 151;
    int n_angular = 9;
  } grid;

  struct ScalarProductConfig {
    std::string kind = "energy";  // energy | sobolev
    double weight = 1.0;
  } scalar_product;

  struct Angular {
    double omega_re = 0.0, omega_im = 0.0;
    double l_max = 16.0;
    int cluster0_size = 8;
    double merge_fraction = 0.1;
    double jordan_tolerance = 1e-6;
    int oracle_cells = 2000;
  } angular;

  struct Radial {
    double omega_re = 0.5, omega_im = 0.1;
    int mode = 0;  // angular eigenvalue index supplying lambda
    double l_max = 24.0;
    double u_min = -30.0, u_max = 60.0;
    int n_u = 901;
    double kernel_v = 0.0;
    double u_match = 60.0;
  } radial;

  struct Scan {
    double re_min = 0.1, re_max = 1.2, im_min = 0.05, im_max = 0.5;
    int n_re = 40, n_im = 20;
    std::vector<int> modes{0, 1};
    double l_max = 24.0;
    double tolerance = 1e-6;
  } scan;

  struct Contour {
    std::string method = "separated";  // separated | contour
    double c = 0.0;                    // 0: 1.25 c_hat
    int p = 2;
    double panel_width = 0.5;
    int nodes = 16;
    double omega_max = 0.0;
    std::vector<double> epsilons{1e-2, 5e-3, 2.5e-3};
    double omega_cap = 20.0;
    int tail_terms = 3;
    double tail_tolerance = 1e-4;
    double inner_width = 0.1, outer_width = 0.25, inner_edge = 2.0;
    int frequency_nodes = 12;
    int grading_levels = 6;
    double far_factor = 8.0;
    int cluster0_size = 1;
  } contour;

  struct Data {
    double centre = 0.0, width = 1.5;
  } data;

  std::vector<double> schedule{0.0, 5.0, 10.0};
  Region region;
  int snapshot_theta = 8;  // Gauss-Legendre angles of the snapshot files
  FDGrid oracle;

  struct Certify {
    std::string family = "sinusoid";  // sinusoid | random
    double v0_re = 2.0, v0_im = 0.0;
    double amplitude_re = 0.0, amplitude_im = 0.3;
    double frequency = 1.0, phase = 0.0;
    double u0 = 0.0, u1 = 10.0;
    double initial_radius = 1e-3;
    double margin = 0.05;
    double nodes_per_phase = 200.0;
  } certify;

  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Parses and validates a configuration (or a manifest's embedded configuration).
/// Throws ConfigError naming the line and column of syntax errors, the unknown key,
/// or the violated rule.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

nlohmann::json config_to_json(const RunConfig& cfg);
/// Canonical text of the fully defaulted configuration; stable under parse and re-echo.
std::string echo_config(const RunConfig& cfg);

StateLayout state_layout(const RunConfig& cfg);
HamiltonianOptions hamiltonian_options(const RunConfig& cfg);
HamiltonianConfig hamiltonian_config(const RunConfig& cfg);
SeparatedOptions separated_options(const RunConfig& cfg);

// Output files. I/O failures throw std::runtime_error carrying the system message.
void write_text(const std::filesystem::path& file, const std::string& text);
void write_csv(const std::filesystem::path& file, const std::string& header,
               const std::vector<std::vector<double>>& rows);
void write_decay_csv(const std::filesystem::path& file, const std::vector<double>& t,
                     const std::vector<double>& sup);
void write_snapshots_csv(const std::filesystem::path& file, const std::vector<FieldSnapshot>& snaps);
std::vector<FieldSnapshot> read_snapshots_csv(const std::filesystem::path& file);

/// {"manifest_version", "code_version", "command", "config", "measured", "outputs"}.
nlohmann::json make_manifest(const std::string& command, const RunConfig& cfg, const nlohmann::json& measured,
                             const std::vector<std::string>& outputs);
void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);

struct CommandInputs {
  bool angular_oracle = false;
  std::vector<std::filesystem::path> files;  // compare: the two snapshot files
};

/// Runs one subcommand, writes its files and manifest.json into `out`, returns the manifest.
nlohmann::json run_command(const std::string& name, const RunConfig& cfg, const std::filesystem::path& out,
                           const CommandInputs& inputs = {});

std::vector<std::string> command_names();

}  // namespace kerr
