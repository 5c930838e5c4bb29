#include "icepred/prediction.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "icepred/adjoint.hpp"
#include "icepred/errors.hpp"

namespace icepred {

void QoiSpec::validate() const {
  if (tag.empty() || tag.find_first_of(",\n\"") != std::string::npos)
    throw ConfigError("QoI tag must be nonempty and free of commas, quotes and newlines");
  if (!(z_min <= z_max)) throw ConfigError("QoI elevation range is empty");
  if (!std::isfinite(rho) || !std::isfinite(unit_factor)) throw ConfigError("QoI scaling must be finite");
}

std::vector<int> outflow_facets(const QoiSpec& spec, const FlowlineMesh& mesh) {
  std::vector<int> out;
  const auto& facets = mesh.facets(spec.boundary);
  for (int f = 0; f < static_cast<int>(facets.size()); ++f) {
    const auto& fv = facets[f];
    const double zmid = 0.5 * (mesh.node(fv.nodes.front()).z + mesh.node(fv.nodes.back()).z);
    if (zmid >= spec.z_min && zmid <= spec.z_max) out.push_back(f);
  }
  if (out.empty()) throw ConfigError("QoI '" + spec.tag + "' selects no boundary facets");
  return out;
}

Eigen::VectorXd qoi_source(const QoiSpec& spec, const FlowlineMesh& mesh) {
  spec.validate();
  Eigen::VectorXd src = Eigen::VectorXd::Zero(mesh.num_velocity_dofs());
  const int k = mesh.order();
  const double scale = spec.rho * spec.unit_factor;
  const auto& facets = mesh.facets(spec.boundary);
  for (int f : outflow_facets(spec, mesh)) {
    const auto& fv = facets[f];
    for (std::size_t q = 0; q < fv.ds.size(); ++q) {
      for (int a = 0; a <= k; ++a) {
        const double w = scale * fv.phi[q * (k + 1) + a] * fv.ds[q];
        src[2 * fv.nodes[a]] += w * fv.normal[0];
        src[2 * fv.nodes[a] + 1] += w * fv.normal[1];
      }
    }
  }
  return src;
}

double eval_qoi(const StokesState& state, const QoiSpec& spec, const FlowlineMesh& mesh) {
  if (state.u.size() != mesh.num_velocity_dofs()) throw InvalidArgument("eval_qoi: state size mismatch");
  return qoi_source(spec, mesh).dot(state.u);
}

PredictionGradient prediction_gradient(const StokesProblem& problem, const Eigen::VectorXd& beta,
                                       const ForwardSolution& forward, const QoiSpec& spec) {
  if (!forward.jacobian) throw InvalidArgument("prediction_gradient: forward solution has no factorization");
  PredictionGradient out;
  out.adjoint = solve_adjoint(problem, *forward.jacobian, qoi_source(spec, problem.mesh()));
  out.gradient = eval_gradient(problem, beta, forward.state, out.adjoint, nullptr);
  return out;
}

PredictionVariance prediction_variance(const Eigen::VectorXd& F, const LowRankPosterior& post) {
  if (F.size() != post.prior().size()) throw InvalidArgument("prediction_variance: size mismatch");
  PredictionVariance out;
  out.var_prior = post.prior_quadratic_form(F);
  out.var_post = post.quadratic_form(F);
  if (out.var_post < 0.0 || out.var_prior < 0.0) throw Error(ErrorKind::internal, "negative prediction variance");
  return out;
}

IfpDirection ifp_direction(const Eigen::VectorXd& F, const LowRankPosterior& post) {
  if (F.size() != post.prior().size()) throw InvalidArgument("ifp_direction: size mismatch");
  if (F.isZero(0.0)) throw InvalidArgument("ifp_direction: zero prediction gradient has no influential direction");
  IfpDirection out;
  out.sigma2 = post.quadratic_form(F);
  if (!(out.sigma2 > 0.0)) throw NumericError("ifp_direction: prediction variance vanishes");
  out.direction = post.covariance_apply(F) / std::pow(out.sigma2, 0.25);
  return out;
}

void write_prediction_csv(const std::filesystem::path& path, const std::vector<PredictionReport>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "qoi_tag,q_map,sigma_post,sigma_prior,Sigma2\n" << std::setprecision(17);
  for (const auto& r : reports)
    out << r.tag << ',' << r.q_map << ',' << r.sigma_post << ',' << r.sigma_prior << ',' << r.sigma2 << '\n';
}

}  // namespace icepred
