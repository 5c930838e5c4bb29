#include "icepred/observations.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace icepred {

const char* to_string(MisfitMode mode) {
  return mode == MisfitMode::deterministic ? "deterministic" : "bayesian";
}

MisfitMode misfit_mode_from_string(const std::string& name) {
  if (name == "deterministic") return MisfitMode::deterministic;
  if (name == "bayesian") return MisfitMode::bayesian;
  throw ConfigError("unknown misfit mode '" + name + "'");
}

Eigen::VectorXd noise_sigma(const Eigen::VectorXd& data, const NoiseModel& noise) {
  Eigen::VectorXd sigma(data.size());
  for (Eigen::Index i = 0; i + 1 < data.size(); i += 2) {
    const double s = noise.relative_level *
                     std::sqrt(data[i] * data[i] + data[i + 1] * data[i + 1] + noise.eps_norm);
    sigma[i] = sigma[i + 1] = s;
  }
  return sigma;
}

ObservationSet::ObservationSet(const FlowlineMesh& mesh, Eigen::VectorXd data, MisfitMode mode,
                               NoiseModel noise)
    : top_nodes_(mesh.boundary_nodes(BoundaryTag::top)),
      num_velocity_dofs_(mesh.num_velocity_dofs()),
      data_(std::move(data)),
      mode_(mode),
      noise_(noise) {
  const int nt = static_cast<int>(top_nodes_.size());
  if (data_.size() != 2 * nt) throw InvalidArgument("observation vector does not match the surface nodes");
  if (!data_.allFinite()) throw NumericError("non-finite observations");
  if (!(noise_.eps_norm > 0.0)) throw ConfigError("eps_norm must be positive");
  if (mode_ == MisfitMode::bayesian && !(noise_.relative_level > 0.0))
    throw ConfigError("the bayesian misfit needs a positive noise level");
  if (!(noise_.reference_length > 0.0)) throw ConfigError("noise reference length must be positive");
  sigma_ = noise_sigma(data_, noise_);

  const SparseMatrix mass = assemble_boundary_mass(mesh, BoundaryTag::top, TraceSpace::velocity);
  std::vector<Eigen::Triplet<double>> trips;
  noise_variance_.resize(2 * nt);
  if (mode_ == MisfitMode::deterministic) {
    Eigen::VectorXd d(nt);
    for (int i = 0; i < nt; ++i)
      d[i] = 1.0 / std::sqrt(data_[2 * i] * data_[2 * i] + data_[2 * i + 1] * data_[2 * i + 1] + noise_.eps_norm);
    for (int c = 0; c < mass.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(mass, c); it; ++it)
        for (int comp = 0; comp < 2; ++comp)
          trips.emplace_back(2 * it.row() + comp, 2 * it.col() + comp, d[it.row()] * it.value() * d[it.col()]);
    for (int i = 0; i < 2 * nt; ++i) noise_variance_[i] = sigma_[i] * sigma_[i];
  } else {
    const Eigen::VectorXd lumped = mass * Eigen::VectorXd::Ones(nt);
    for (int i = 0; i < nt; ++i) {
      for (int comp = 0; comp < 2; ++comp) {
        const int j = 2 * i + comp;
        noise_variance_[j] = sigma_[j] * sigma_[j] * noise_.reference_length / lumped[i];
        trips.emplace_back(j, j, 1.0 / noise_variance_[j]);
      }
    }
  }
  weight_.resize(2 * nt, 2 * nt);
  weight_.setFromTriplets(trips.begin(), trips.end());
}

double ObservationSet::misfit(const Eigen::VectorXd& predicted) const {
  const Eigen::VectorXd r = predicted - data_;
  return 0.5 * r.dot(weight_ * r);
}

Eigen::VectorXd ObservationSet::weighted_residual(const Eigen::VectorXd& predicted) const {
  if (predicted.size() != data_.size()) throw InvalidArgument("prediction does not match the observations");
  return weight_ * (predicted - data_);
}

Eigen::VectorXd ObservationSet::lift(const Eigen::VectorXd& surface_dual) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_velocity_dofs_);
  for (std::size_t i = 0; i < top_nodes_.size(); ++i) {
    out[2 * top_nodes_[i]] = surface_dual[2 * i];
    out[2 * top_nodes_[i] + 1] = surface_dual[2 * i + 1];
  }
  return out;
}

ObservationSet ObservationSet::scaled(double factor) const {
  ObservationSet out = *this;
  out.weight_ *= factor;
  out.noise_variance_ /= factor;
  return out;
}

void write_observations(const std::filesystem::path& path, const FlowlineMesh& mesh, const Eigen::VectorXd& data) {
  const auto& top = mesh.boundary_nodes(BoundaryTag::top);
  if (data.size() != 2 * static_cast<Eigen::Index>(top.size()))
    throw InvalidArgument("observation vector does not match the surface nodes");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# observations nx=" << mesh.nx() << " k=" << mesh.order() << " columns: x z u_x u_z\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < top.size(); ++i)
    out << mesh.node(top[i]).x << ' ' << mesh.node(top[i]).z << ' ' << data[2 * i] << ' ' << data[2 * i + 1]
        << '\n';
}

Eigen::VectorXd read_observations(const std::filesystem::path& path, const FlowlineMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open observations " + path.string());
  const auto& top = mesh.boundary_nodes(BoundaryTag::top);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, z, ux, uz;
    if (!(ls >> x >> z >> ux >> uz)) throw IoError(path.string() + ": malformed row '" + line + "'");
    const std::size_t i = values.size() / 2;
    if (i >= top.size() || std::abs(x - mesh.node(top[i]).x) > 1e-9 * std::max(1.0, mesh.domain().length))
      throw IoError(path.string() + ": observations were written for a different mesh");
    values.push_back(ux);
    values.push_back(uz);
  }
  if (values.size() != 2 * top.size()) throw IoError(path.string() + ": wrong number of observations");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace icepred
