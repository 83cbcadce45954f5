#include "cmpx/core/constraint.hpp"

#include <string>

#include "cmpx/core/stats.hpp"

namespace cmpx {

ConstraintSystem::ConstraintSystem(int ambient_dim, int codim, double tolerance,
                                   int max_projection_iters)
    : n_(ambient_dim), k_(codim), epsilon_(tolerance), max_iters_(max_projection_iters)
{
    if (k_ <= 0 || k_ >= n_)
        throw ContractError("ConstraintSystem: require 0 < k < n");
    set_tolerance(tolerance);
    set_max_projection_iters(max_projection_iters);
}

void ConstraintSystem::set_tolerance(double epsilon)
{
    if (!(epsilon > 0.0))
        throw ContractError("ConstraintSystem: tolerance must be positive");
    epsilon_ = epsilon;
}

void ConstraintSystem::set_max_projection_iters(int n)
{
    if (n < 1)
        throw ContractError("ConstraintSystem: projection iteration limit must be >= 1");
    max_iters_ = n;
}

void ConstraintSystem::check_config(const Config& q) const
{
    if (q.size() != n_)
        throw ContractError("configuration has dimension " + std::to_string(q.size()) +
                            ", expected " + std::to_string(n_));
    if (!q.allFinite())
        throw ContractError("configuration has non-finite entries");
}

Vector ConstraintSystem::evaluate(const Config& q) const
{
    check_config(q);
    Vector out(k_);
    compute(q, out);
    return out;
}

Matrix ConstraintSystem::jacobian(const Config& q) const
{
    check_config(q);
    Matrix J(k_, n_);
    if (analytic_jacobian(q, J))
        return J;
    return finite_difference_jacobian(q);
}

Matrix ConstraintSystem::finite_difference_jacobian(const Config& q, double h) const
{
    check_config(q);
    Matrix J(k_, n_);
    Vector fp(k_), fm(k_);
    Config x = q;
    for (int j = 0; j < n_; ++j) {
        x[j] = q[j] + h;
        compute(x, fp);
        x[j] = q[j] - h;
        compute(x, fm);
        x[j] = q[j];
        if (!fp.allFinite() || !fm.allFinite())
            throw NumericError("finite_difference_jacobian: non-finite constraint value near q");
        J.col(j) = (fp - fm) / (2.0 * h);
    }
    return J;
}

SphereConstraint::SphereConstraint(double tolerance, int max_projection_iters)
    : ConstraintSystem(3, 1, tolerance, max_projection_iters)
{
}

void SphereConstraint::compute(const Config& q, Eigen::Ref<Vector> out) const
{
    out[0] = q.norm() - 1.0;
}

bool SphereConstraint::analytic_jacobian(const Config& q, Eigen::Ref<Matrix> out) const
{
    const double r = q.norm();
    // The gradient is undefined at the origin; report it as zero so callers see a singularity.
    if (r < kSingularGradient)
        out.setZero();
    else
        out.row(0) = q.transpose() / r;
    return true;
}

Matrix pseudoinverse(const Matrix& J)
{
    if (!J.allFinite())
        throw ContractError("pseudoinverse: non-finite matrix");
    if (J.size() == 0)
        return Matrix::Zero(J.cols(), J.rows());
    Eigen::JacobiSVD<Matrix> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = 1e-10 * (s.size() > 0 ? s[0] : 0.0);
    Vector inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff && s[i] > 0.0)
            inv[i] = 1.0 / s[i];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

ProjectionResult project(const ConstraintSystem& sys, Config q, int max_iters)
{
    sys.check_config(q);
    ++counters().projection_calls;
    const int limit = max_iters < 0 ? sys.max_projection_iters() : max_iters;
    ProjectionResult result;
    for (int i = 0; i <= limit; ++i) {
        result.iterations = i;
        const Vector dx = sys.evaluate(q);
        if (!dx.allFinite()) {
            result.status = ProjectionStatus::NonFinite;
            result.q = std::move(q);
            return result;
        }
        if (dx.norm() < sys.tolerance()) {
            result.status = ProjectionStatus::Converged;
            result.q = std::move(q);
            return result;
        }
        if (i == limit)
            break;
        const Matrix J = sys.jacobian(q);
        if (J.norm() < kSingularGradient) {
            result.status = ProjectionStatus::SingularGradient;
            result.q = std::move(q);
            return result;
        }
        q -= pseudoinverse(J) * dx;
        if (!q.allFinite()) {
            result.status = ProjectionStatus::NonFinite;
            result.q = std::move(q);
            return result;
        }
    }
    result.status = ProjectionStatus::IterationLimit;
    result.q = std::move(q);
    return result;
}

const char* to_string(ProjectionStatus s)
{
    switch (s) {
    case ProjectionStatus::Converged:
        return "converged";
    case ProjectionStatus::IterationLimit:
        return "iteration-limit";
    case ProjectionStatus::SingularGradient:
        return "singular-gradient";
    case ProjectionStatus::NonFinite:
        return "non-finite";
    }
    return "unknown";
}

}  // namespace cmpx
