#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kten/geometry.hpp"
#include "kten/kernels.hpp"
#include "kten/vec.hpp"

namespace kten {

struct Species {
  double mass = 1.0;
  std::vector<Vec> v;
  double weight = 1.0;  // density represented by one particle
};

struct Ensemble {
  int d = 3;
  std::vector<Species> species;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t step_index = 0;

  // Nonempty species, positive and equal weights, strictly increasing masses.
  void validate() const;
  std::size_t total_particles() const;
};

enum class SimModel { Inelastic, Mixture };

struct SimConfig {
  SimModel model = SimModel::Mixture;
  int d = 3;
  double gamma = 0.0;
  bool cutoff = true;                 // cutoff: h(theta) = h_const; otherwise noncutoff with s
  double s = 0.5;
  double h_const = 1.0;
  double alpha = 0.5;                 // inelastic only
  std::vector<double> masses{1.0};    // mixture; one entry gives elastic mono-species
  std::vector<std::size_t> particles{10000};
  double dt = 0.01;
  std::uint64_t steps = 100;
  std::uint64_t seed = 20240607;
  double theta_min = 1e-2;            // noncutoff truncation
  std::string init = "gaussian";      // gaussian | two_bump | shell
  double init_temperature = 1.0;
  std::uint64_t snapshot_every = 0;   // 0: only the final state
  std::uint64_t majorant_refresh = 100;
  std::string output_dir = "out";

  void validate() const;
  // Kernel with model and truncation applied.
  KernelSpec effective_kernel() const;
};

// Parses flat key=value text ('#' starts a comment). Unknown keys are errors.
SimConfig parse_sim_config(const std::string& text);
// Resolved key=value pairs, enough to rebuild the same config.
std::map<std::string, std::string> sim_config_entries(const SimConfig& cfg);

Ensemble initialize(const SimConfig& cfg);

struct Moments {
  std::vector<double> mass;  // per species
  Vec momentum;
  double energy = 0.0;       // sum m w |v|^2
  double entropy = 0.0;      // sum_i int f_i log f_i, histogram estimate
};

Moments moments(const Ensemble& ens);

struct PositivityReport {
  std::size_t bins_in_ball = 0;
  std::size_t empty_in_ball = 0;
  std::vector<std::uint64_t> counts;  // bins^d grid over [-radius, radius]^d about the mean
  double populated_radius = 0.0;      // every bin centred within this radius is nonempty
};

PositivityReport positivity_probe(const Ensemble& ens, double radius, int bins);

struct StepStats {
  std::uint64_t candidates = 0;
  std::uint64_t collisions = 0;
  std::uint64_t reruns = 0;
  std::uint64_t clipped = 0;        // accepted pairs whose rate exceeded the capped majorant
  double majorant = 0.0;            // largest pair majorant used
  double predicted_loss = 0.0;      // inelastic: sum m w (1 - alpha^2)/2 <g, n>^2 over collisions
  double max_collision_probability = 0.0;  // dt times the per-particle majorant rate
};

// Angular truncation summary. The grazing rate below theta_min is infinite for
// noncutoff kernels, so the discarded part is measured by momentum transfer.
struct TruncationInfo {
  double theta_min;
  double kept_rate;           // |S^{d-2}| int_{theta_min}^pi b sin^{d-2}
  double kept_transfer;       // same with an extra sin^2(theta/2)
  double discarded_transfer;  // |S^{d-2}| int_0^{theta_min} b sin^{d-2} sin^2(theta/2)
};

class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  const SimConfig& config() const { return cfg_; }
  TruncationInfo truncation() const;
  // Angular rate Lambda: the angular integral of the sampled profile.
  double angular_rate() const { return lambda_; }
  // Mean of <g/|g|, n>^2 under the sampled angular law, by quadrature:
  // sin^2(theta/2) for sigma sampling, cos^2(theta) for cutoff n sampling.
  double mean_normal_fraction() const { return mean_normal_fraction_; }

  StepStats step(Ensemble& ens);
  // Runs cfg.steps steps, calling observe after each one (and once before the first).
  void run(Ensemble& ens, const std::function<void(const Ensemble&, const StepStats&)>& observe);

 private:
  struct AngleTable {
    std::vector<double> theta, cdf;
    double sample(double u) const;
  };

  void refresh_majorants(const Ensemble& ens);

  SimConfig cfg_;
  KernelSpec kernel_;
  double lambda_ = 0.0;
  double mean_normal_fraction_ = 0.0;
  TruncationInfo trunc_{};
  AngleTable table_;
  std::vector<double> majorant_;  // per unordered species pair (upper triangle)
  std::vector<double> ceiling_;   // inflation limit for each pair majorant
  std::uint64_t last_refresh_ = UINT64_MAX;
  bool warned_dt_ = false;
};

// One step with a fresh simulator state.
Ensemble step(Ensemble ens, const SimConfig& cfg);

// Snapshot files: "KTEN", u32 version, u32 d, u64 count, then count*d doubles (little endian).
void write_snapshot(const std::string& path, const std::vector<Vec>& v, int d);
std::vector<Vec> read_snapshot(const std::string& path, int* d_out = nullptr);

}  // namespace kten
