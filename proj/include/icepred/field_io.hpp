#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "icepred/mesh.hpp"

namespace icepred {

/// Plain-text nodal field: a `# field <name> dims=<nx> <nz> k=<k>` header
/// followed by one `x z value` row per dof.
struct FieldFile {
  std::string name;
  int nx = 0, nz = 0, k = 0;
  std::vector<double> x, z, value;

  Eigen::VectorXd values() const;
};

void write_field(const std::filesystem::path& path, const FieldFile& field);
FieldFile read_field(const std::filesystem::path& path);

/// Field on the basal vertices (P1 parameter space).
FieldFile basal_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values);
/// One scalar per velocity node.
FieldFile nodal_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values);
/// One scalar per pressure dof.
FieldFile pressure_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values);

/// Checks that a field read back matches the mesh it is loaded onto.
Eigen::VectorXd load_basal_field(const std::filesystem::path& path, const FlowlineMesh& mesh);

}  // namespace icepred
