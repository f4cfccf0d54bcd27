#include "ovepg/pg_random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ovepg {

namespace {

constexpr double kPi = std::numbers::pi;

// Crossover point of the two piecewise-coefficient regimes.
constexpr double kTrunc = 0.64;

// log of the standard normal CDF, stable for arbitrarily negative x.
double log_norm_cdf(double x) {
    if (x > -8.0) {
        return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    }
    // Asymptotic expansion of Mills' ratio.
    const double x2 = x * x;
    const double series = -1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(-x) +
           std::log1p(series);
}

// Piecewise coefficients a_n(x) of the alternating series for the Jacobi
// density; left branch for x <= t, right branch for x > t.
double series_coef(int n, double x) {
    const double k = (n + 0.5) * kPi;
    if (x > kTrunc) {
        return k * std::exp(-0.5 * k * k * x);
    }
    if (x > 0.0) {
        const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) +
                             std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
        return std::exp(expnt);
    }
    return 0.0;
}

// Probability of proposing from the truncated-exponential branch.
double exp_branch_mass(double z) {
    const double t = kTrunc;
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);

    const double x0 = std::log(fz) + fz * t;
    const double xb = x0 - z + log_norm_cdf(b);
    const double xa = x0 + z + log_norm_cdf(a);
    const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(mu = 1/z, lambda = 1) truncated to (0, t).
double sample_trunc_inv_gauss(double z, RngStream& rng) {
    z = std::fabs(z);
    const double t = kTrunc;
    double x = t + 1.0;
    if (z < 1.0 / t) {
        // mu > t: rejection from the truncated chi-like proposal.
        double alpha = 0.0;
        while (rng.uniform() > alpha) {
            double e1 = rng.exponential();
            double e2 = rng.exponential();
            while (e1 * e1 > 2.0 * e2 / t) {
                e1 = rng.exponential();
                e2 = rng.exponential();
            }
            x = 1.0 + e1 * t;
            x = t / (x * x);
            alpha = std::exp(-0.5 * z * z * x);
        }
    } else {
        const double mu = 1.0 / z;
        while (x > t) {
            double y = rng.normal();
            y *= y;
            const double half_mu = 0.5 * mu;
            const double mu_y = mu * y;
            x = mu + half_mu * mu_y -
                half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
            if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
        }
    }
    return x;
}

// One draw of J*(1, z) via Devroye's alternating-series rejection.
double sample_jacobi_star(double z, RngStream& rng) {
    z = std::fabs(z);
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double p_exp = exp_branch_mass(z);

    for (;;) {
        double x;
        if (rng.uniform() < p_exp) {
            x = kTrunc + rng.exponential() / fz;
        } else {
            x = sample_trunc_inv_gauss(z, rng);
        }

        double s = series_coef(0, x);
        const double y = rng.uniform() * s;
        int n = 0;
        for (;;) {
            ++n;
            if (n % 2 == 1) {
                s -= series_coef(n, x);
                if (y <= s) return x;
            } else {
                s += series_coef(n, x);
                if (y > s) break;  // reject, re-propose
            }
        }
    }
}

}  // namespace

double pg_mean(int b, double c) {
    if (b < 1) throw std::invalid_argument("pg_mean: b must be >= 1");
    const double ac = std::fabs(c);
    if (ac < 1e-4) {
        // tanh(c/2) / (2c) = 1/4 - c^2/48 + c^4/480 - ...
        const double c2 = c * c;
        return b * (0.25 - c2 / 48.0 + c2 * c2 / 480.0);
    }
    return b * std::tanh(0.5 * c) / (2.0 * c);
}

double sample_pg1(double c, RngStream& rng) {
    if (!std::isfinite(c)) throw std::invalid_argument("sample_pg1: c must be finite");
    return 0.25 * sample_jacobi_star(0.5 * std::fabs(c), rng);
}

double sample_pg(int b, double c, RngStream& rng) {
    if (b < 1) throw std::invalid_argument("sample_pg: b must be >= 1");
    double sum = 0.0;
    for (int i = 0; i < b; ++i) sum += sample_pg1(c, rng);
    return sum;
}

double sample_pg_oracle(int b, double c, int terms, RngStream& rng) {
    if (b < 1) throw std::invalid_argument("sample_pg_oracle: b must be >= 1");
    if (terms < 1) throw std::invalid_argument("sample_pg_oracle: terms must be >= 1");
    const double shift = c * c / (4.0 * kPi * kPi);
    double sum = 0.0;
    for (int k = 1; k <= terms; ++k) {
        const double denom = (k - 0.5) * (k - 0.5) + shift;
        sum += rng.gamma(static_cast<double>(b)) / denom;
    }
    return sum / (2.0 * kPi * kPi);
}

}  // namespace ovepg
