#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace refchoice {

using Objective = std::function<double(std::span<const double>)>;

inline double eval(const Objective& f, const Eigen::VectorXd& x) {
    return f(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

// Central-difference gradient; per-coordinate step scaled by |x_i|.
inline Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x,
                                          double step = 1e-6) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        double fp = eval(f, xp);
        xp[i] = x[i] - h;
        double fm = eval(f, xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central-difference Hessian from gradient differences; symmetrized.
inline Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x,
                                         double step = 1e-4) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        Eigen::VectorXd gp = numerical_gradient(f, xp, step);
        xp[i] = x[i] - h;
        Eigen::VectorXd gm = numerical_gradient(f, xp, step);
        xp[i] = x[i];
        H.col(i) = (gp - gm) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

struct AscentOptions {
    int max_iterations = 500;
    double tol_objective = 1e-9;  // relative change between accepted iterates
    double tol_gradient = 1e-5;   // infinity norm
    double fd_step = 1e-6;
};

struct AscentResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
};

// BFGS ascent with finite-difference gradients and Armijo backtracking.
inline AscentResult bfgs_maximize(const Objective& f, const Eigen::VectorXd& x0,
                                  const AscentOptions& opts = {}) {
    const Eigen::Index n = x0.size();
    AscentResult res;
    res.x = x0;
    res.value = eval(f, x0);
    if (!std::isfinite(res.value)) return res;

    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = numerical_gradient(f, res.x, opts.fd_step);
    res.grad_norm = g.lpNorm<Eigen::Infinity>();

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.iterations = iter + 1;
        if (res.grad_norm < opts.tol_gradient) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = Hinv * g;
        double slope = g.dot(dir);
        if (slope <= 0.0 || !std::isfinite(slope)) {  // lost curvature, reset
            Hinv.setIdentity();
            dir = g;
            slope = g.squaredNorm();
        }

        double step = 1.0;
        double fnew = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd xnew;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            xnew = res.x + step * dir;
            fnew = eval(f, xnew);
            if (std::isfinite(fnew) && fnew >= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd gnew = numerical_gradient(f, xnew, opts.fd_step);
        Eigen::VectorXd sv = xnew - res.x;
        Eigen::VectorXd yv = g - gnew;  // ascent: y is the gradient decrease
        double sy = sv.dot(yv);
        if (sy > 1e-12) {
            Eigen::VectorXd Hy = Hinv * yv;
            double yHy = yv.dot(Hy);
            Hinv += ((sy + yHy) / (sy * sy)) * (sv * sv.transpose()) -
                    (Hy * sv.transpose() + sv * Hy.transpose()) / sy;
        }

        double rel_change = std::abs(fnew - res.value) / std::max(1.0, std::abs(fnew));
        res.x = xnew;
        res.value = fnew;
        g = gnew;
        res.grad_norm = g.lpNorm<Eigen::Infinity>();
        if (rel_change < opts.tol_objective) {
            res.converged = true;
            break;
        }
    }
    if (res.grad_norm < opts.tol_gradient) res.converged = true;
    return res;
}

}  // namespace refchoice
