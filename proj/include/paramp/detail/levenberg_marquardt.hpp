#ifndef PARAMP_DETAIL_LEVENBERG_MARQUARDT_HPP
#define PARAMP_DETAIL_LEVENBERG_MARQUARDT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace paramp::detail {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct LmOptions {
    int max_iterations = 500;
    double initial_damping = 1e-3;  // times max diag(J^T J)
    double increase = 10.0;         // on rejected step
    double decrease = 3.0;          // on accepted step
    double x_tol = 1e-13;           // relative step size
    double f_tol = 1e-15;           // relative cost decrease
    double cost_floor = 0.0;        // stop when cost falls below this
    /// Per-parameter scale used for finite-difference steps and for the
    /// relative step test when a parameter is near zero.
    std::vector<double> typical;
};

struct LmResult {
    Vec params;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    Mat jtj;            // J^T J at the solution
    std::size_t n_residuals = 0;
    std::vector<double> cost_history;  // cost after each accepted step, starting with the initial

    /// Parameter covariance s^2 (J^T J)^-1 with s^2 = cost / (m - n).
    /// Pseudo-inverse on a rank-deficient J^T J (zero variance in null
    /// directions).
    Mat covariance() const {
        const auto n = params.size();
        const auto dof = static_cast<double>(n_residuals) - static_cast<double>(n);
        Mat cov = Mat::Zero(n, n);
        if (dof <= 0.0 || jtj.rows() != n) return cov;
        Eigen::SelfAdjointEigenSolver<Mat> es(jtj);
        const double tol = es.eigenvalues().cwiseAbs().maxCoeff() * 1e-14;
        Vec inv = es.eigenvalues().unaryExpr([tol](double v) { return v > tol ? 1.0 / v : 0.0; });
        cov = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        return cov * (cost / dof);
    }

    std::vector<double> standard_errors() const {
        const Mat cov = covariance();
        std::vector<double> se(static_cast<std::size_t>(params.size()));
        for (Eigen::Index i = 0; i < params.size(); ++i) se[i] = std::sqrt(std::max(cov(i, i), 0.0));
        return se;
    }
};

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

/// Central finite-difference Jacobian of `f` at `p`.
inline Mat numeric_jacobian(const ResidualFn& f, const Vec& p, const std::vector<double>& typical,
                            double rel_step = 1e-6) {
    const Vec r0 = f(p);
    Mat j(r0.size(), p.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double scale = typical.empty() ? 1.0 : typical[static_cast<std::size_t>(k)];
        const double h = rel_step * std::max(std::abs(p[k]), scale);
        Vec a = p, b = p;
        a[k] += h;
        b[k] -= h;
        j.col(k) = (f(a) - f(b)) / (a[k] - b[k]);
    }
    return j;
}

/// Levenberg-Marquardt with Marquardt diagonal scaling:
/// (J^T J + lambda diag(J^T J)) dp = -J^T r. lambda starts at
/// initial_damping, is multiplied by `increase` when a step raises the cost
/// and divided by `decrease` when it is accepted, so the cost is
/// non-increasing over accepted iterates.
inline LmResult levenberg_marquardt(const ResidualFn& residual, Vec p, const LmOptions& opt = {},
                                    const JacobianFn& jacobian = nullptr) {
    auto jac = [&](const Vec& x) {
        return jacobian ? jacobian(x) : numeric_jacobian(residual, x, opt.typical);
    };
    LmResult out;
    Vec r = residual(p);
    out.n_residuals = static_cast<std::size_t>(r.size());
    double cost = r.squaredNorm();
    out.cost_history.push_back(cost);
    Mat j = jac(p);
    Mat jtj = j.transpose() * j;
    Vec g = j.transpose() * r;
    double lambda = opt.initial_damping;
    int it = 0;
    bool converged = !(cost > opt.cost_floor);
    while (!converged && it < opt.max_iterations) {
        ++it;
        Vec d = jtj.diagonal().cwiseMax(1e-300);
        Mat a = jtj;
        a.diagonal() += lambda * d;
        const Vec step = a.ldlt().solve(-g);
        if (!step.allFinite()) {
            lambda *= opt.increase;
            if (lambda > 1e30) break;
            continue;
        }
        const Vec trial = p + step;
        const Vec r_trial = residual(trial);
        const double c_trial = r_trial.allFinite() ? r_trial.squaredNorm()
                                                   : std::numeric_limits<double>::infinity();
        if (c_trial < cost) {
            bool small_step = true;
            for (Eigen::Index k = 0; k < p.size(); ++k) {
                const double scale =
                    opt.typical.empty() ? 0.0 : opt.typical[static_cast<std::size_t>(k)];
                if (std::abs(step[k]) > opt.x_tol * (std::abs(p[k]) + scale)) small_step = false;
            }
            const double rel_decrease = (cost - c_trial) / std::max(cost, 1e-300);
            p = trial;
            r = r_trial;
            cost = c_trial;
            out.cost_history.push_back(cost);
            j = jac(p);
            jtj = j.transpose() * j;
            g = j.transpose() * r;
            lambda /= opt.decrease;
            converged = small_step || rel_decrease < opt.f_tol || !(cost > opt.cost_floor);
        } else {
            lambda *= opt.increase;
            // No representable descent left: we are at the minimum to
            // machine precision.
            if (lambda > 1e20) {
                converged = true;
            }
        }
    }
    out.params = p;
    out.cost = cost;
    out.iterations = it;
    out.converged = converged;
    out.jtj = jtj;
    return out;
}

}  // namespace paramp::detail

#endif  // PARAMP_DETAIL_LEVENBERG_MARQUARDT_HPP
