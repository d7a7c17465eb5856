#include "batrank/gmrf.hpp"

#include <cmath>
#include <string>

namespace batrank {

namespace {

void require_size(std::size_t got, std::size_t want) {
    if (got != want) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(got) + " vs " + std::to_string(want));
    }
}

}  // namespace

TridiagPrecision TridiagPrecision::scaled(double c) const {
    TridiagPrecision out = *this;
    for (auto& x : out.diag) x *= c;
    for (auto& x : out.offdiag) x *= c;
    return out;
}

TridiagPrecision& TridiagPrecision::add_diagonal(std::span<const double> c) {
    require_size(c.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] += c[i];
    return *this;
}

std::vector<double> TridiagPrecision::multiply(std::span<const double> v) const {
    const std::size_t n = size();
    require_size(v.size(), n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diag[i] * v[i];
        if (i > 0) acc += offdiag[i - 1] * v[i - 1];
        if (i + 1 < n) acc += offdiag[i] * v[i + 1];
        y[i] = acc;
    }
    return y;
}

TridiagPrecision build_q(std::size_t n) {
    if (n == 0) throw std::invalid_argument("build_q: n must be positive");
    TridiagPrecision q;
    q.diag.assign(n, 2.0);
    q.diag[0] = 1.0;
    q.offdiag.assign(n - 1, -1.0);
    return q;
}

double quad_form(const TridiagPrecision& a, std::span<const double> v) {
    const std::size_t n = a.size();
    require_size(v.size(), n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a.diag[i] * v[i] * v[i];
        if (i + 1 < n) acc += 2.0 * a.offdiag[i] * v[i] * v[i + 1];
    }
    return acc;
}

double BidiagFactor::log_det() const {
    double acc = 0.0;
    for (double d : diag) acc += std::log(d);
    return 2.0 * acc;
}

BidiagFactor chol(const TridiagPrecision& a) {
    const std::size_t n = a.size();
    require_size(a.offdiag.size(), n > 0 ? n - 1 : 0);
    BidiagFactor f;
    f.diag.resize(n);
    f.subdiag.resize(n > 0 ? n - 1 : 0);
    double carry = 0.0;  // L(i, i-1)^2
    for (std::size_t i = 0; i < n; ++i) {
        const double pivot = a.diag[i] - carry;
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw NotPositiveDefinite("non-positive pivot at row " + std::to_string(i));
        }
        f.diag[i] = std::sqrt(pivot);
        if (i + 1 < n) {
            f.subdiag[i] = a.offdiag[i] / f.diag[i];
            carry = f.subdiag[i] * f.subdiag[i];
        }
    }
    return f;
}

std::vector<double> solve_upper(const BidiagFactor& f, std::span<const double> z) {
    const std::size_t n = f.size();
    require_size(z.size(), n);
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double acc = z[k];
        if (k + 1 < n) acc -= f.subdiag[k] * x[k + 1];
        x[k] = acc / f.diag[k];
    }
    return x;
}

std::vector<double> solve(const BidiagFactor& f, std::span<const double> rhs) {
    const std::size_t n = f.size();
    require_size(rhs.size(), n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = rhs[i];
        if (i > 0) acc -= f.subdiag[i - 1] * y[i - 1];
        y[i] = acc / f.diag[i];
    }
    return solve_upper(f, y);
}

std::vector<double> sample_mvn(std::span<const double> mean, const BidiagFactor& f, Rng& rng) {
    require_size(mean.size(), f.size());
    std::vector<double> z(f.size());
    for (auto& v : z) v = rng.normal();
    auto x = solve_upper(f, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += mean[i];
    return x;
}

std::vector<double> sample_mvn_tridiag(std::span<const double> mean, const TridiagPrecision& precision,
                                       Rng& rng) {
    return sample_mvn(mean, chol(precision), rng);
}

}  // namespace batrank
