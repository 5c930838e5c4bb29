#include "icepred/field_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "icepred/errors.hpp"

namespace icepred {

Eigen::VectorXd FieldFile::values() const {
  return Eigen::Map<const Eigen::VectorXd>(value.data(), static_cast<Eigen::Index>(value.size()));
}

void write_field(const std::filesystem::path& path, const FieldFile& field) {
  if (field.x.size() != field.value.size() || field.z.size() != field.value.size())
    throw InvalidArgument("field '" + field.name + "': coordinate and value counts differ");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# field " << field.name << " dims=" << field.nx << ' ' << field.nz << " k=" << field.k
      << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < field.value.size(); ++i)
    out << field.x[i] << ' ' << field.z[i] << ' ' << field.value[i] << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

FieldFile read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open field file " + path.string());
  FieldFile f;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty field file");
  {
    std::istringstream hs(line);
    std::string hash, kw, dims, kk;
    hs >> hash >> kw >> f.name >> dims >> f.nz >> kk;
    if (hash != "#" || kw != "field" || dims.rfind("dims=", 0) != 0 || kk.rfind("k=", 0) != 0)
      throw IoError(path.string() + ": malformed field header");
    try {
      f.nx = std::stoi(dims.substr(5));
      f.k = std::stoi(kk.substr(2));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed field header");
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double x, z, v;
    if (!(ls >> x >> z >> v)) throw IoError(path.string() + ": malformed row '" + line + "'");
    f.x.push_back(x);
    f.z.push_back(z);
    f.value.push_back(v);
  }
  return f;
}

namespace {

FieldFile header(const FlowlineMesh& mesh, const std::string& name) {
  FieldFile f;
  f.name = name;
  f.nx = mesh.nx();
  f.nz = mesh.nz();
  f.k = mesh.order();
  return f;
}

}  // namespace

FieldFile basal_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values) {
  const auto& verts = mesh.boundary_vertices(BoundaryTag::bottom);
  if (values.size() != static_cast<Eigen::Index>(verts.size()))
    throw InvalidArgument("basal field '" + name + "' has the wrong size");
  FieldFile f = header(mesh, name);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    f.x.push_back(mesh.node(verts[i]).x);
    f.z.push_back(mesh.node(verts[i]).z);
    f.value.push_back(values[static_cast<Eigen::Index>(i)]);
  }
  return f;
}

FieldFile nodal_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values) {
  if (values.size() != mesh.num_velocity_nodes())
    throw InvalidArgument("nodal field '" + name + "' has the wrong size");
  FieldFile f = header(mesh, name);
  for (int i = 0; i < mesh.num_velocity_nodes(); ++i) {
    f.x.push_back(mesh.node(i).x);
    f.z.push_back(mesh.node(i).z);
    f.value.push_back(values[i]);
  }
  return f;
}

FieldFile pressure_field(const FlowlineMesh& mesh, const std::string& name, const Eigen::VectorXd& values) {
  if (values.size() != mesh.num_pressure_dofs())
    throw InvalidArgument("pressure field '" + name + "' has the wrong size");
  FieldFile f = header(mesh, name);
  for (int i = 0; i < mesh.num_pressure_dofs(); ++i) {
    const Point p = mesh.pressure_point(i);
    f.x.push_back(p.x);
    f.z.push_back(p.z);
    f.value.push_back(values[i]);
  }
  return f;
}

Eigen::VectorXd load_basal_field(const std::filesystem::path& path, const FlowlineMesh& mesh) {
  const FieldFile f = read_field(path);
  if (f.nx != mesh.nx() || f.nz != mesh.nz() || f.k != mesh.order() ||
      static_cast<int>(f.value.size()) != mesh.num_basal_dofs())
    throw IoError(path.string() + ": field was written for a different mesh");
  return f.values();
}

}  // namespace icepred
