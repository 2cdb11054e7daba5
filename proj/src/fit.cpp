#include "qoct/fit.hpp"

#include "qoct/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qoct {

std::size_t FitResult::index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("unknown fit parameter: " + name);
    return static_cast<std::size_t>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return values[index(name)]; }
double FitResult::error(const std::string& name) const { return errors[index(name)]; }

namespace {

double step_for(double p, double rel) { return rel * std::max(std::abs(p), 1e-3); }

double sum_squares(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

}  // namespace

Eigen::MatrixXd finite_difference_jacobian(const ResidualFunction& f, std::size_t m,
                                           std::span<const double> params, double rel) {
    const std::size_t n = params.size();
    Eigen::MatrixXd J(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> rp(m), rm(m);
    for (std::size_t j = 0; j < n; ++j) {
        const double h = step_for(params[j], rel);
        p[j] = params[j] + h;
        f(p, rp);
        p[j] = params[j] - h;
        f(p, rm);
        p[j] = params[j];
        for (std::size_t i = 0; i < m; ++i)
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (rp[i] - rm[i]) / (2.0 * h);
    }
    return J;
}

FitProblem curve_problem(CurveModel model, std::span<const double> x, std::span<const double> y,
                         std::vector<double> initial, std::vector<std::string> names,
                         std::span<const double> sqrt_weights) {
    if (x.size() != y.size()) throw std::invalid_argument("curve_problem: x/y size mismatch");
    if (!sqrt_weights.empty() && sqrt_weights.size() != x.size())
        throw std::invalid_argument("curve_problem: weight size mismatch");
    std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    std::vector<double> ws(sqrt_weights.begin(), sqrt_weights.end());
    FitProblem prob;
    prob.residual_count = xs.size();
    prob.initial = std::move(initial);
    prob.names = std::move(names);
    prob.residuals = [model = std::move(model), xs = std::move(xs), ys = std::move(ys),
                      ws = std::move(ws)](std::span<const double> p, std::span<double> r) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = model(xs[i], p) - ys[i];
            r[i] = ws.empty() ? d : ws[i] * d;
        }
    };
    return prob;
}

FitResult damped_least_squares(const FitProblem& prob, const LeastSquaresOptions& opt) {
    const std::size_t n = prob.initial.size();
    const std::size_t m = prob.residual_count;
    if (n == 0) throw std::invalid_argument("damped_least_squares: no parameters");
    for (double v : prob.initial)
        if (!std::isfinite(v)) throw std::invalid_argument("damped_least_squares: non-finite initial parameter");

    std::vector<bool> fixed = prob.fixed.empty() ? std::vector<bool>(n, false) : prob.fixed;
    Bounds bounds = prob.bounds.lower.empty() ? Bounds::unbounded(n) : prob.bounds;
    if (fixed.size() != n || bounds.lower.size() != n || bounds.upper.size() != n)
        throw std::invalid_argument("damped_least_squares: mask/bounds size mismatch");

    std::vector<std::size_t> free_idx;
    for (std::size_t j = 0; j < n; ++j)
        if (!fixed[j]) free_idx.push_back(j);
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    if (free_idx.size() > m) throw std::invalid_argument("damped_least_squares: more free parameters than residuals");

    FitResult res;
    res.names = prob.names;
    if (res.names.size() != n) {
        res.names.clear();
        for (std::size_t j = 0; j < n; ++j) res.names.push_back("p" + std::to_string(j));
    }

    std::vector<double> p = prob.initial;
    for (std::size_t j : free_idx) p[j] = std::clamp(p[j], bounds.lower[j], bounds.upper[j]);

    std::vector<double> r(m);
    auto eval = [&](const std::vector<double>& q, std::vector<double>& out) {
        prob.residuals(q, out);
        ++res.evaluations;
        for (double v : out)
            if (!std::isfinite(v)) return false;
        return true;
    };
    if (!eval(p, r)) throw NumericalError("damped_least_squares: non-finite residuals at the initial point");
    double cost = sum_squares(r);

    // Jacobian restricted to the free parameters.
    auto jacobian = [&](const std::vector<double>& q) {
        Eigen::MatrixXd J(static_cast<Eigen::Index>(m), nf);
        std::vector<double> qq = q, rp(m), rm(m);
        for (Eigen::Index c = 0; c < nf; ++c) {
            const std::size_t j = free_idx[static_cast<std::size_t>(c)];
            const double h = step_for(q[j], opt.fd_relative_step);
            qq[j] = q[j] + h;
            prob.residuals(qq, rp);
            qq[j] = q[j] - h;
            prob.residuals(qq, rm);
            qq[j] = q[j];
            res.evaluations += 2;
            for (std::size_t i = 0; i < m; ++i)
                J(static_cast<Eigen::Index>(i), c) = (rp[i] - rm[i]) / (2.0 * h);
        }
        return J;
    };

    Eigen::Map<const Eigen::VectorXd> rvec_init(r.data(), static_cast<Eigen::Index>(m));
    (void)rvec_init;

    double lambda = -1.0;
    double nu = 2.0;
    bool converged = nf == 0;
    std::string why = nf == 0 ? "no free parameters" : "";
    int it = 0;
    Eigen::MatrixXd J;
    while (!converged && it < opt.max_iterations) {
        J = jacobian(p);
        Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(m));
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * rv;
        // Active set: parameters sitting on a bound with the descent direction
        // pointing outside are held for this step.
        for (Eigen::Index c = 0; c < nf; ++c) {
            const std::size_t j = free_idx[static_cast<std::size_t>(c)];
            const bool at_lo = p[j] <= bounds.lower[j] && g(c) > 0.0;
            const bool at_hi = p[j] >= bounds.upper[j] && g(c) < 0.0;
            if (at_lo || at_hi) {
                const double d = std::max(A(c, c), 1e-300);
                A.row(c).setZero();
                A.col(c).setZero();
                A(c, c) = d;
                g(c) = 0.0;
            }
        }
        // Scale-free: largest cosine between r and a Jacobian column.
        double cosine = 0.0;
        const double rn = rv.norm();
        for (Eigen::Index c = 0; c < nf; ++c) {
            const double jn = J.col(c).norm();
            if (jn > 0.0 && rn > 0.0) cosine = std::max(cosine, std::abs(g(c)) / (jn * rn));
        }
        if (cosine <= opt.gradient_tolerance) {
            converged = true;
            why = "gradient tolerance";
            break;
        }
        if (lambda < 0.0) lambda = opt.initial_damping;

        bool accepted = false;
        int retries = 0;
        while (!accepted) {
            Eigen::MatrixXd Ad = A;
            for (Eigen::Index k = 0; k < nf; ++k) Ad(k, k) += lambda * std::max(A(k, k), 1e-300);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ad);
            Eigen::VectorXd step;
            bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
            if (ok) {
                step = ldlt.solve(-g);
                ok = step.allFinite();
            }
            if (!ok) {
                if (++retries > opt.max_damping_retries)
                    throw NumericalError("damped_least_squares: singular normal equations after damping retries");
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
            std::vector<double> trial = p;
            for (Eigen::Index c = 0; c < nf; ++c) {
                const std::size_t j = free_idx[static_cast<std::size_t>(c)];
                trial[j] = std::clamp(p[j] + step(c), bounds.lower[j], bounds.upper[j]);
            }
            // Step actually taken after projection.
            Eigen::VectorXd taken(nf);
            double pnorm = 0.0, snorm = 0.0;
            for (Eigen::Index c = 0; c < nf; ++c) {
                const std::size_t j = free_idx[static_cast<std::size_t>(c)];
                taken(c) = trial[j] - p[j];
                pnorm += p[j] * p[j];
                snorm += taken(c) * taken(c);
            }
            std::vector<double> rt(m);
            const bool finite = eval(trial, rt);
            const double trial_cost = finite ? sum_squares(rt) : std::numeric_limits<double>::infinity();
            // Predicted reduction of the linearised model.
            const double predicted = -(2.0 * taken.dot(g) + taken.dot(A * taken));
            const double actual = cost - trial_cost;
            const double rho = predicted > 0.0 ? actual / predicted : -1.0;
            if (finite && trial_cost <= cost && (rho > 0.0 || actual >= 0.0)) {
                const double rel_red = cost > 0.0 ? actual / cost : 0.0;
                p = std::move(trial);
                r = std::move(rt);
                cost = trial_cost;
                accepted = true;
                ++it;
                lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * std::clamp(rho, 0.0, 1.0) - 1.0, 3));
                nu = 2.0;
                if (std::sqrt(snorm) <= opt.step_tolerance * (std::sqrt(pnorm) + opt.step_tolerance)) {
                    converged = true;
                    why = "step tolerance";
                } else if (rel_red >= 0.0 && rel_red <= opt.cost_tolerance) {
                    converged = true;
                    why = "cost tolerance";
                } else if (cost == 0.0) {
                    converged = true;
                    why = "zero residual";
                }
            } else {
                if (std::sqrt(snorm) <= opt.step_tolerance * (std::sqrt(pnorm) + opt.step_tolerance)) {
                    // The damped step cannot make progress any more: stationary point.
                    converged = true;
                    why = "step tolerance";
                    break;
                }
                if (++retries > opt.max_damping_retries) {
                    converged = true;
                    why = "no further reduction";
                    break;
                }
                lambda *= nu;
                nu *= 2.0;
            }
        }
    }

    res.values = p;
    res.iterations = it;
    res.converged = converged;
    res.message = converged ? why : "maximum iterations reached";
    res.residual_norm = std::sqrt(cost);
    res.errors.assign(n, 0.0);
    res.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (nf > 0) {
        J = jacobian(p);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinV);
        const Eigen::VectorXd s = svd.singularValues();
        const double smax = s(0);
        const double smin = s(nf - 1);
        res.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        Eigen::VectorXd sinv2(nf);
        for (Eigen::Index k = 0; k < nf; ++k)
            sinv2(k) = s(k) > smax * 1e-14 ? 1.0 / (s(k) * s(k)) : 0.0;
        Eigen::MatrixXd cov = svd.matrixV() * sinv2.asDiagonal() * svd.matrixV().transpose();
        if (opt.scale_covariance) {
            const double dof = static_cast<double>(m) - static_cast<double>(nf);
            cov *= dof > 0.0 ? cost / dof : 0.0;
        }
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b)
                res.covariance(static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(a)]),
                               static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(b)])) = cov(a, b);
        for (std::size_t j : free_idx) {
            const auto jj = static_cast<Eigen::Index>(j);
            res.errors[j] = std::sqrt(std::max(res.covariance(jj, jj), 0.0));
        }
    }
    return res;
}

}  // namespace qoct
