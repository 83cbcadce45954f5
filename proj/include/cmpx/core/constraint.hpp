#pragma once

#include "cmpx/core/types.hpp"

namespace cmpx {

/// Default manifold tolerance and projection iteration limit.
inline constexpr double kDefaultTolerance = 1e-3;
inline constexpr int kDefaultProjectionIters = 50;
/// Central finite-difference step.
inline constexpr double kFiniteDifferenceStep = 1e-6;
/// Projection aborts when the Jacobian Frobenius norm drops below this.
inline constexpr double kSingularGradient = 1e-9;

/**
 * Implicit constraint F: R^n -> R^k. A configuration is on the manifold iff
 * ||F(q)||_2 < tolerance().
 *
 * Subclasses implement compute(); they may override analytic_jacobian() and
 * return true, otherwise jacobian() falls back to central differences.
 */
class ConstraintSystem {
public:
    ConstraintSystem(int ambient_dim, int codim, double tolerance = kDefaultTolerance,
                     int max_projection_iters = kDefaultProjectionIters);
    virtual ~ConstraintSystem() = default;

    int ambient_dim() const { return n_; }
    int codim() const { return k_; }
    int manifold_dim() const { return n_ - k_; }
    double tolerance() const { return epsilon_; }
    int max_projection_iters() const { return max_iters_; }

    void set_tolerance(double epsilon);
    void set_max_projection_iters(int n);

    Vector evaluate(const Config& q) const;
    Matrix jacobian(const Config& q) const;
    Matrix finite_difference_jacobian(const Config& q, double h = kFiniteDifferenceStep) const;

    double distance(const Config& q) const { return evaluate(q).norm(); }
    bool on_manifold(const Config& q) const { return distance(q) < epsilon_; }

    void check_config(const Config& q) const;

protected:
    virtual void compute(const Config& q, Eigen::Ref<Vector> out) const = 0;
    virtual bool analytic_jacobian(const Config& /*q*/, Eigen::Ref<Matrix> /*out*/) const
    {
        return false;
    }

private:
    int n_;
    int k_;
    double epsilon_;
    int max_iters_;
};

/// Unit sphere in R^3: F(q) = ||q|| - 1, J(q) = q^T / ||q||.
class SphereConstraint final : public ConstraintSystem {
public:
    explicit SphereConstraint(double tolerance = kDefaultTolerance,
                              int max_projection_iters = kDefaultProjectionIters);

protected:
    void compute(const Config& q, Eigen::Ref<Vector> out) const override;
    bool analytic_jacobian(const Config& q, Eigen::Ref<Matrix> out) const override;
};

/// Moore-Penrose pseudoinverse via SVD; singular values below 1e-10 * max are dropped.
Matrix pseudoinverse(const Matrix& J);

enum class ProjectionStatus { Converged, IterationLimit, SingularGradient, NonFinite };

struct ProjectionResult {
    Config q;
    ProjectionStatus status = ProjectionStatus::IterationLimit;
    int iterations = 0;

    bool ok() const { return status == ProjectionStatus::Converged; }
};

/// Newton-style projection q <- q - J(q)^+ F(q). max_iters < 0 uses the system default.
ProjectionResult project(const ConstraintSystem& sys, Config q, int max_iters = -1);

const char* to_string(ProjectionStatus s);

}  // namespace cmpx
