#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "icepred/config.hpp"

namespace icepred {

enum class Stage { forward, synth, invert, lcurve, spectrum, sample, predict, all };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& name);

/// Ordered key=value lines of record.txt, grouped by stage.
class RunRecord {
 public:
  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// Replaces every entry of `group` with `entries`.
  void replace(const std::string& group, std::vector<std::pair<std::string, std::string>> entries);
  /// Value of "group.key"; empty if absent.
  std::string get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>& groups() const {
    return groups_;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> groups_;
};

/// beta_true of the configuration at the basal vertices of `mesh`.
Eigen::VectorXd basal_values(const BetaFieldConfig& field, const FlowlineMesh& mesh);
/// Constant field log(factor * median(exp(beta_true))).
Eigen::VectorXd initial_beta(const InitConfig& init, const Eigen::VectorXd& beta_true);

struct SyntheticData {
  Eigen::VectorXd clean;  // noise-free surface velocity on the inversion mesh
  Eigen::VectorXd data;
  int forward_newton_iters = 0;
};

/// Surface velocity of beta_true computed on a mesh refined by
/// cfg.synth.fine_factor, restricted to the top nodes of the inversion mesh
/// described by cfg.mesh, plus noise from the "noise" stream of cfg.seed.
SyntheticData synthesize_observations(const RunConfig& cfg);

using LogSink = std::function<void(const std::string& line)>;

/// Runs pipeline stages against the artifacts of one output directory.
/// Stages read the artifacts of earlier stages from disk, so they may be run
/// in separate processes.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg, LogSink log = {});

  const RunConfig& config() const { return cfg_; }
  std::filesystem::path output_dir() const { return cfg_.output_dir; }
  const RunRecord& record() const { return record_; }

  void run(Stage stage);

 private:
  void run_forward();
  void run_synth();
  void run_invert();
  void run_lcurve();
  void run_spectrum();
  void run_sample();
  void run_predict();
  void log(const std::string& line) const;
  void commit(const std::string& stage, std::vector<std::pair<std::string, std::string>> entries, long solves);

  RunConfig cfg_;
  LogSink log_;
  RunRecord record_;
};

}  // namespace icepred
