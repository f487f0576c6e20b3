#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "ambitflux/geometry.hpp"
#include "ambitflux/levy.hpp"
#include "ambitflux/rng.hpp"
#include "ambitflux/types.hpp"

namespace ambitflux {

/// C1 kernel catalog: F(p,q) = scalar(p,q) * C with analytic partials.
class KernelF {
 public:
  enum class Kind { Constant, Bump, BoundaryVanishing, Tilted, BumpTilted };

  static KernelF constant(Mat C);
  static KernelF bump(Mat C);              ///< C exp(-||q-p||^2)
  static KernelF boundary_vanishing(Mat C);  ///< (1-||p-q||^2) C
  static KernelF tilted(Mat C, Vec a);     ///< (1 + a.q) C
  static KernelF bump_tilted(Mat C, Vec a);  ///< (1 + a.q) exp(-||q-p||^2) C

  Kind kind() const { return kind_; }
  int rows() const { return static_cast<int>(C_.rows()); }  ///< d
  int cols() const { return static_cast<int>(C_.cols()); }  ///< m
  const Mat& matrix() const { return C_; }

  double scalar(const Vec& p, const Vec& q) const;
  double scalar_dp(int k, const Vec& p, const Vec& q) const;  ///< d/dp_k
  double scalar_dq(int k, const Vec& p, const Vec& q) const;  ///< d/dq_k

  Mat value(const Vec& p, const Vec& q) const { return scalar(p, q) * C_; }
  Mat dp(int k, const Vec& p, const Vec& q) const { return scalar_dp(k, p, q) * C_; }
  Mat dq(int k, const Vec& p, const Vec& q) const { return scalar_dq(k, p, q) * C_; }

  bool translation_invariant() const {
    return kind_ == Kind::Constant || kind_ == Kind::Bump || kind_ == Kind::BoundaryVanishing;
  }
  bool is_constant() const { return kind_ == Kind::Constant; }

 private:
  Kind kind_ = Kind::Constant;
  Mat C_;
  Vec a_;
};

/// Driving basis: a characteristic triplet or an exactly strictly stable law.
struct FieldBasis {
  enum class Kind { Triplet, Stable };
  Kind kind = Kind::Triplet;
  LevyTriplet triplet;
  StableSpec stable;

  static FieldBasis from_triplet(LevyTriplet t);
  static FieldBasis from_stable(StableSpec s);
  int dim() const;
};

struct FieldModelOptions {
  double series_budget = 2e4;      ///< expected explicit jumps for heavy-tail bases
  double series_eps = 0.0;         ///< explicit magnitude cutoff; 0 derives it from the budget
  int cov_qmc_nodes = 200000;      ///< quasi-random nodes for generic covariance overlaps
  int drift_quad_nodes = 32;       ///< base per-axis nodes for drift quadrature over A
  bool gamma_index_row = false;    ///< flip the DX drift index convention (m == d only)
  double bounding_margin = 0.05;   ///< extra bounding-region margin
};

struct IncrementTable {
  Vec x0;                   ///< X(p0)
  std::vector<Mat> delta;   ///< per time: d x n_nodes of X(p0 + r t y_j) - X(p0)
  std::vector<double> times;
  double r = 0.0;
};

/// Joint Gaussian factor over a fixed list of evaluation points. Every
/// catalog kernel factors as scalar(p,q) * C, so the covariance is always a
/// Kronecker product of a scalar overlap matrix and the mark covariance.
struct GaussianFactor {
  int n_points = 0, d = 0;
  Mat points;  ///< d x n key (exact match required on cache hits)
  Mat L_pts;   ///< n x n Cholesky of the scalar overlap matrix
  Mat R_mark;  ///< d x d root of the mark covariance C Sigma_eff C'

  /// One joint draw: n x d matrix of Gaussian field values (row per point).
  Mat draw(RngStream& rng) const;
};

class FieldRealization;

/// Immutable per-experiment description of the field X(p) = int_{A+p} F(p,q) L(dq):
/// shape, kernel, basis, bounding region, and the derived simulation recipe
/// (effective drift density, effective Gaussian covariance including the
/// small-jump remainder, explicit-jump cutoffs). Thread-safe to share.
class FieldModel {
 public:
  FieldModel(AmbitSet shape, KernelF kernel, FieldBasis basis, double max_offset,
             FieldModelOptions opt = {});

  const AmbitSet& shape() const { return shape_; }
  const KernelF& kernel() const { return kernel_; }
  const FieldBasis& basis() const { return basis_; }
  const FieldModelOptions& options() const { return opt_; }
  int space_dim() const { return shape_.dim(); }
  int mark_dim() const { return basis_.dim(); }
  const BoxRegion& region() const { return region_; }
  double max_offset() const { return max_offset_; }

  const Vec& drift_density() const { return drift_density_; }
  const Mat& gaussian_sigma() const { return sigma_eff_; }
  bool has_gaussian() const { return has_gaussian_; }
  double series_eps() const { return series_eps_; }

  /// Frozen realization; deterministic given (master_seed, replication).
  FieldRealization realize(std::uint64_t master_seed, std::uint64_t replication) const;

  /// int_{A+p} F(p,q) drift_density dq.
  Vec drift_integral(const Vec& p) const;
  /// Combined DX drift term: int_A sum_j (dqF + dpF)^{(i,j)} gamma^{(j)}, plus
  /// split variants for the flipped index convention.
  Mat gradient_drift_combined(const Vec& p, const Vec& gamma_eff) const;
  Mat gradient_drift_row_convention(const Vec& p, const Vec& gamma_eff) const;

  /// d x d covariance block of the Gaussian component between X(pa), X(pb).
  Mat gaussian_cov_block(const Vec& pa, const Vec& pb) const;
  /// Factor over a point list (d x n), cached; built once per distinct list.
  std::shared_ptr<const GaussianFactor> gaussian_factor(const Mat& points) const;

  void check_in_region(const Vec& p) const;

 private:
  friend class FieldRealization;
  double scalar_overlap(const Vec& pa, const Vec& pb) const;
  void build_quadrature();

  AmbitSet shape_;
  KernelF kernel_;
  FieldBasis basis_;
  FieldModelOptions opt_;
  double max_offset_ = 0.0;
  BoxRegion region_;

  Vec drift_density_;   // m
  Mat sigma_eff_;       // m x m
  bool has_gaussian_ = false;
  Mat mark_cov_;        // C Sigma_eff C' (d x d)
  double series_eps_ = 0.0;
  double series_rate_ = 0.0;              // lambda_pd total
  std::vector<double> series_atom_cum_;   // cumulative lambda_pd weights
  std::vector<double> cp_eps_;            // per-triplet-atom explicit cutoff

  Mat quad_nodes_;   // d x nq, A-relative
  Vec quad_weights_; // nq
  bool drift_const_valid_ = false;
  Vec drift_const_;

  Mat qmc_nodes_;  // d x n_qmc over the region
  double qmc_cell_weight_ = 0.0;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::uint64_t, std::shared_ptr<const GaussianFactor>> factor_cache_;
};

/// One frozen draw of the basis: explicit jump list plus a deferred joint
/// Gaussian component. Evaluations at different points share the same frozen
/// randomness; everything is deterministic given (master_seed, replication).
class FieldRealization {
 public:
  const FieldModel& model() const { return *model_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t replication() const { return replication_; }
  const std::vector<JumpConfiguration::Jump>& jumps() const { return jumps_; }
  double truncation_eps() const { return truncation_eps_; }

  /// X(p); Gaussian part drawn jointly with every other evaluation of this
  /// realization (sequential conditioning).
  Vec evaluate(const Vec& p);

  /// Coupled increments X(p0 + r t_l y_j) - X(p0) over the quadrature nodes.
  /// Must be the first Gaussian use of the realization (the joint draw is
  /// batched); jump/drift parts share the evaluate() code paths bitwise.
  IncrementTable increments(const Vec& p0, double r, const std::vector<double>& times,
                            const SurfaceQuadrature& quad);

  /// DX(p0) per the finite-variation gradient; throws on infinite-variation
  /// bases. gamma defaults to the effective FV drift.
  Mat gradient(const Vec& p0) const;
  /// Gradient terms with an explicit drift vector (no variation check); used
  /// by the degenerate-kernel route where gamma replaces gamma0.
  Mat gradient_terms(const Vec& p0, const Vec& gamma_eff) const;

 private:
  friend class FieldModel;
  Vec jump_sum(const Vec& p) const;
  void extend_gaussian(const Vec& p, Vec& out);

  const FieldModel* model_ = nullptr;
  std::uint64_t master_seed_ = 0, replication_ = 0;
  std::vector<JumpConfiguration::Jump> jumps_;
  std::vector<Vec> jump_cx_;  // kernel matrix times mark, per jump
  double truncation_eps_ = 0.0;
  RngStream gauss_stream_;

  // sequential joint-Gaussian state
  std::vector<Vec> gauss_points_;
  Mat gauss_chol_;  // k x k lower
  Vec gauss_values_, gauss_white_;
  bool gauss_used_ = false;
};

/// Increment table for an arbitrary (e.g. deterministic) field function.
IncrementTable increments_of(const std::function<Vec(const Vec&)>& field, const Vec& p0, double r,
                             const std::vector<double>& times, const SurfaceQuadrature& quad);

}  // namespace ambitflux
