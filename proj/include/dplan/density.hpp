#pragma once

// Liouville-equation density transport along closed-loop rollouts:
//   rho(Phi(x0, t), t) = rho0(x0) * exp(g(x0, t)),  g' = -div f.
// g is integrated jointly with the state in the same RK4 pass.

#include <array>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dplan/closed_loop.hpp"
#include "dplan/rng.hpp"

namespace dplan {

enum class MarginalKind { kDirac, kGaussian, kUniform };

/// One state dimension of a product distribution. `width` is sigma for a
/// Gaussian (truncated at 3 sigma) and the half-width for a uniform.
struct Marginal {
  MarginalKind kind = MarginalKind::kDirac;
  double center = 0.0;
  double width = 0.0;

  double density(double x) const;
  bool in_support(double x) const;
  double sample(Rng& rng) const;
};

/// Product of per-dimension marginals. Dirac dimensions are excluded from
/// the density value (a fully Dirac component has density 1).
struct ProductComponent {
  std::array<Marginal, kStateDim> dims;
  double weight = 1.0;

  double density(const State& x) const;
  bool in_support(const State& x) const;
  State sample(Rng& rng) const;
  State mean() const;
};

class InitialDistribution {
 public:
  enum class Kind { kGaussian, kUniformBox, kProduct, kMixture };

  InitialDistribution() = default;
  explicit InitialDistribution(std::vector<ProductComponent> components);

  /// Truncated Gaussian with diagonal sigma; zero sigma entries are Dirac.
  static InitialDistribution gaussian(const State& mean, const State& sigma);
  static InitialDistribution uniform_box(const State& center, const State& half_widths);
  static InitialDistribution dirac(const State& at);
  /// Gaussian position, Dirac heading and speed, uniform heading bias.
  static InitialDistribution planner_default(const State& mean, double position_sigma = 0.3,
                                             double bias_half_width = 0.1);

  Kind kind() const;
  State mean() const;
  double density(const State& x) const;
  bool in_support(const State& x) const;
  State sample(Rng& rng) const;
  const std::vector<ProductComponent>& components() const { return components_; }

 private:
  std::vector<ProductComponent> components_;
};

struct InitialSample {
  State x0;
  double rho0 = 1.0;
};

struct DensityRollout {
  std::vector<State> states;     // t_0 .. t_N
  std::vector<double> densities; // rho(x(t_k), t_k)
  std::vector<double> g_log;     // g(x0, t_k)
};

/// Closed-loop rollout with joint density integration. When `tape` is
/// given, the RK4 stage states of every substep are recorded.
DensityRollout propagate(const State& x0, double rho0, const ReferenceTrajectory& ref,
                         const Controller& ctrl,
                         std::vector<SampleStages>* tape = nullptr);
DensityRollout propagate(const State& x0, double rho0, const PolicyParams& policy,
                         const TimeGrid& grid, const Controller& ctrl);

/// Density transport for an arbitrary autonomous or time-varying field
/// f(x, t) with divergence div(x, t), used for analytic test systems.
template <int Dim>
struct FieldRollout {
  std::vector<Eigen::Matrix<double, Dim, 1>> states;
  std::vector<double> densities;
  std::vector<double> g_log;
};

template <int Dim, class Field, class Divergence>
FieldRollout<Dim> propagate_field(const Field& f, const Divergence& div,
                                  const Eigen::Matrix<double, Dim, 1>& x0, double rho0,
                                  const TimeGrid& grid) {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  FieldRollout<Dim> out;
  const double h = grid.substep();
  Vec x = x0;
  double g = 0.0;
  out.states.push_back(x);
  out.g_log.push_back(0.0);
  out.densities.push_back(rho0);
  for (int j = 0; j < grid.total_substeps(); ++j) {
    const double t = j * h;
    const Vec k1 = f(x, t);
    const double q1 = -div(x, t);
    const Vec x2 = x + 0.5 * h * k1;
    const Vec k2 = f(x2, t + 0.5 * h);
    const double q2 = -div(x2, t + 0.5 * h);
    const Vec x3 = x + 0.5 * h * k2;
    const Vec k3 = f(x3, t + 0.5 * h);
    const double q3 = -div(x3, t + 0.5 * h);
    const Vec x4 = x + h * k3;
    const Vec k4 = f(x4, t + h);
    const double q4 = -div(x4, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    g += (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    if ((j + 1) % grid.substeps == 0) {
      out.states.push_back(x);
      out.g_log.push_back(g);
      out.densities.push_back(rho0 * std::exp(g));
    }
  }
  return out;
}

/// S samples from the support with their initial densities.
std::vector<InitialSample> sample_initial(const InitialDistribution& dist, int count,
                                          std::uint64_t seed);

/// Backend that predicts state and density trajectories for a batch of
/// initial states under one policy.
class DensityPredictor {
 public:
  virtual ~DensityPredictor() = default;
  virtual std::string name() const = 0;
  virtual std::vector<DensityRollout> predict(const std::vector<InitialSample>& samples,
                                              const PolicyParams& policy,
                                              const TimeGrid& grid) const = 0;
};

/// Exact backend: integrates the LE along every sample.
class ExactLiouvillePredictor final : public DensityPredictor {
 public:
  explicit ExactLiouvillePredictor(Controller ctrl) : ctrl_(std::move(ctrl)) {}
  std::string name() const override { return "exact"; }
  std::vector<DensityRollout> predict(const std::vector<InitialSample>& samples,
                                      const PolicyParams& policy,
                                      const TimeGrid& grid) const override;
  const Controller& controller() const { return ctrl_; }

 private:
  Controller ctrl_;
};

/// File-loaded fully connected network mapping (x0, t_k, p) to
/// (Phi(x0, t_k) - x0, g(x0, t_k)). No training code ships with it.
class MlpDensityPredictor final : public DensityPredictor {
 public:
  struct Layer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    bool tanh = true;
  };

  /// Throws std::runtime_error("predictor unavailable: ...") on failure.
  static std::unique_ptr<MlpDensityPredictor> load(const std::string& path);

  std::string name() const override { return "mlp"; }
  std::vector<DensityRollout> predict(const std::vector<InitialSample>& samples,
                                      const PolicyParams& policy,
                                      const TimeGrid& grid) const override;

 private:
  std::vector<Layer> layers_;
};

std::vector<DensityRollout> predict_batch(const DensityPredictor& predictor,
                                          const std::vector<InitialSample>& samples,
                                          const PolicyParams& policy, const TimeGrid& grid);

/// CSV with columns sample_id,k,t,p_x,p_y,theta,v,theta_bias,rho.
void write_rollouts_csv(std::ostream& os, const std::vector<DensityRollout>& rollouts,
                        const TimeGrid& grid);

}  // namespace dplan
