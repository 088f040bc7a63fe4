#include "dplan/density.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace dplan {

namespace {

constexpr double kTruncation = 3.0;

double truncated_normal_mass() { return std::erf(kTruncation / std::sqrt(2.0)); }

bool is_point(const Marginal& m) {
  return m.kind == MarginalKind::kDirac || m.width <= 0.0;
}

}  // namespace

double Marginal::density(double x) const {
  if (is_point(*this)) return 1.0;
  if (!in_support(x)) return 0.0;
  if (kind == MarginalKind::kUniform) return 0.5 / width;
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z) / (width * std::sqrt(2.0 * std::numbers::pi)) /
         truncated_normal_mass();
}

bool Marginal::in_support(double x) const {
  if (is_point(*this)) return x == center;
  const double reach = kind == MarginalKind::kUniform ? width : kTruncation * width;
  return std::abs(x - center) <= reach;
}

double Marginal::sample(Rng& rng) const {
  if (is_point(*this)) return center;
  if (kind == MarginalKind::kUniform) {
    std::uniform_real_distribution<double> d(center - width, center + width);
    return d(rng);
  }
  std::normal_distribution<double> d(0.0, 1.0);
  for (;;) {
    const double z = d(rng);
    if (std::abs(z) <= kTruncation) return center + width * z;
  }
}

double ProductComponent::density(const State& x) const {
  double p = 1.0;
  for (int i = 0; i < kStateDim; ++i) p *= dims[i].density(x(i));
  return p;
}

bool ProductComponent::in_support(const State& x) const {
  for (int i = 0; i < kStateDim; ++i)
    if (!dims[i].in_support(x(i))) return false;
  return true;
}

State ProductComponent::sample(Rng& rng) const {
  State x;
  for (int i = 0; i < kStateDim; ++i) x(i) = dims[i].sample(rng);
  return x;
}

State ProductComponent::mean() const {
  State x;
  for (int i = 0; i < kStateDim; ++i) x(i) = dims[i].center;
  return x;
}

InitialDistribution::InitialDistribution(std::vector<ProductComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("distribution has no components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    for (const auto& m : c.dims)
      if (m.width < 0.0) throw std::invalid_argument("negative marginal width");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

InitialDistribution InitialDistribution::gaussian(const State& mean, const State& sigma) {
  ProductComponent c;
  for (int i = 0; i < kStateDim; ++i)
    c.dims[i] = {sigma(i) > 0.0 ? MarginalKind::kGaussian : MarginalKind::kDirac, mean(i),
                 sigma(i)};
  return InitialDistribution({c});
}

InitialDistribution InitialDistribution::uniform_box(const State& center,
                                                     const State& half_widths) {
  ProductComponent c;
  for (int i = 0; i < kStateDim; ++i)
    c.dims[i] = {half_widths(i) > 0.0 ? MarginalKind::kUniform : MarginalKind::kDirac,
                 center(i), half_widths(i)};
  return InitialDistribution({c});
}

InitialDistribution InitialDistribution::dirac(const State& at) {
  return gaussian(at, State::Zero());
}

InitialDistribution InitialDistribution::planner_default(const State& mean,
                                                         double position_sigma,
                                                         double bias_half_width) {
  ProductComponent c;
  c.dims[kPx] = {MarginalKind::kGaussian, mean(kPx), position_sigma};
  c.dims[kPy] = {MarginalKind::kGaussian, mean(kPy), position_sigma};
  c.dims[kTheta] = {MarginalKind::kDirac, mean(kTheta), 0.0};
  c.dims[kV] = {MarginalKind::kDirac, mean(kV), 0.0};
  c.dims[kBias] = {MarginalKind::kUniform, 0.0, bias_half_width};
  return InitialDistribution({c});
}

InitialDistribution::Kind InitialDistribution::kind() const {
  if (components_.size() > 1) return Kind::kMixture;
  bool gaussian = false, uniform = false;
  for (const auto& m : components_.front().dims) {
    if (is_point(m)) continue;
    (m.kind == MarginalKind::kGaussian ? gaussian : uniform) = true;
  }
  if (gaussian && uniform) return Kind::kProduct;
  return uniform ? Kind::kUniformBox : Kind::kGaussian;
}

State InitialDistribution::mean() const {
  State m = State::Zero();
  for (const auto& c : components_) m += c.weight * c.mean();
  return m;
}

double InitialDistribution::density(const State& x) const {
  double p = 0.0;
  for (const auto& c : components_) p += c.weight * c.density(x);
  return p;
}

bool InitialDistribution::in_support(const State& x) const {
  for (const auto& c : components_)
    if (c.in_support(x)) return true;
  return false;
}

State InitialDistribution::sample(Rng& rng) const {
  if (components_.size() == 1) return components_.front().sample(rng);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  double u = pick(rng);
  for (const auto& c : components_) {
    if (u < c.weight) return c.sample(rng);
    u -= c.weight;
  }
  return components_.back().sample(rng);
}

DensityRollout propagate(const State& x0, double rho0, const ReferenceTrajectory& ref,
                         const Controller& ctrl, std::vector<SampleStages>* tape) {
  if (!(rho0 >= 0.0)) throw std::invalid_argument("initial density must be >= 0");
  const TimeGrid& grid = ref.grid;
  const double h = grid.substep();
  DensityRollout out;
  out.states.reserve(grid.steps + 1);
  out.densities.reserve(grid.steps + 1);
  out.g_log.reserve(grid.steps + 1);
  if (tape) tape->resize(grid.total_substeps());

  State x = x0;
  double g = 0.0;
  out.states.push_back(x);
  out.densities.push_back(rho0);
  out.g_log.push_back(0.0);
  for (int j = 0; j < grid.total_substeps(); ++j) {
    closed_loop_rk4_step(ctrl, ref.stages[j], h, x, g, tape ? &(*tape)[j] : nullptr);
    if (!x.allFinite() || !std::isfinite(g)) throw std::runtime_error("integration diverged");
    if ((j + 1) % grid.substeps == 0) {
      out.states.push_back(x);
      out.g_log.push_back(g);
      out.densities.push_back(rho0 * std::exp(g));
    }
  }
  return out;
}

DensityRollout propagate(const State& x0, double rho0, const PolicyParams& policy,
                         const TimeGrid& grid, const Controller& ctrl) {
  if (!x0.allFinite()) throw std::invalid_argument("initial state not finite");
  return propagate(x0, rho0, recover_reference(policy, grid), ctrl);
}

std::vector<InitialSample> sample_initial(const InitialDistribution& dist, int count,
                                          std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Rng rng(seed);
  std::vector<InitialSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const State x = dist.sample(rng);
    out.push_back({x, dist.density(x)});
  }
  return out;
}

std::vector<DensityRollout> ExactLiouvillePredictor::predict(
    const std::vector<InitialSample>& samples, const PolicyParams& policy,
    const TimeGrid& grid) const {
  const ReferenceTrajectory ref = recover_reference(policy, grid);
  std::vector<DensityRollout> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(propagate(s.x0, s.rho0, ref, ctrl_));
  return out;
}

std::unique_ptr<MlpDensityPredictor> MlpDensityPredictor::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("predictor unavailable: cannot open " + path);
  auto net = std::make_unique<MlpDensityPredictor>();
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& layer : j.at("layers")) {
      const auto& w = layer.at("weights");
      const auto& b = layer.at("bias");
      Layer l;
      l.weights.resize(static_cast<Eigen::Index>(w.size()),
                       static_cast<Eigen::Index>(w.at(0).size()));
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
          l.weights(r, c) = w.at(r).at(c).get<double>();
      l.bias.resize(static_cast<Eigen::Index>(b.size()));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = b.at(r).get<double>();
      l.tanh = layer.value("activation", std::string("tanh")) == "tanh";
      if (l.bias.size() != l.weights.rows())
        throw std::runtime_error("bias size does not match weights");
      if (!net->layers_.empty() && net->layers_.back().weights.rows() != l.weights.cols())
        throw std::runtime_error("layer shapes do not chain");
      net->layers_.push_back(std::move(l));
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("predictor unavailable: ") + e.what());
  }
  if (net->layers_.empty() || net->layers_.back().weights.rows() != kStateDim + 1)
    throw std::runtime_error("predictor unavailable: output layer must have 6 rows");
  return net;
}

std::vector<DensityRollout> MlpDensityPredictor::predict(
    const std::vector<InitialSample>& samples, const PolicyParams& policy,
    const TimeGrid& grid) const {
  const Eigen::VectorXd p = policy.flat();
  const Eigen::Index in_dim = kStateDim + 1 + p.size();
  if (layers_.front().weights.cols() != in_dim)
    throw std::invalid_argument("predictor input size does not match policy");
  std::vector<DensityRollout> out;
  out.reserve(samples.size());
  Eigen::VectorXd z(in_dim);
  for (const auto& s : samples) {
    DensityRollout r;
    r.states.push_back(s.x0);
    r.g_log.push_back(0.0);
    r.densities.push_back(s.rho0);
    for (int k = 1; k <= grid.steps; ++k) {
      z << s.x0, grid.time(k), p;
      Eigen::VectorXd a = z;
      for (const auto& l : layers_) {
        a = l.weights * a + l.bias;
        if (l.tanh) a = a.array().tanh();
      }
      r.states.push_back(s.x0 + a.head<kStateDim>());
      r.g_log.push_back(a(kStateDim));
      r.densities.push_back(s.rho0 * std::exp(a(kStateDim)));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DensityRollout> predict_batch(const DensityPredictor& predictor,
                                          const std::vector<InitialSample>& samples,
                                          const PolicyParams& policy, const TimeGrid& grid) {
  return predictor.predict(samples, policy, grid);
}

void write_rollouts_csv(std::ostream& os, const std::vector<DensityRollout>& rollouts,
                        const TimeGrid& grid) {
  os << "sample_id,k,t,p_x,p_y,theta,v,theta_bias,rho\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& r = rollouts[i];
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      const State& x = r.states[k];
      os << i << ',' << k << ',' << grid.time(static_cast<int>(k));
      for (int d = 0; d < kStateDim; ++d) os << ',' << x(d);
      os << ',' << r.densities[k] << '\n';
    }
  }
}

}  // namespace dplan
