#include "flowalign/linalg.hpp"

#include <cmath>
#include <string>

#include "flowalign/errors.hpp"

namespace flowalign {
namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        throw DimError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                       " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

Vector& Vector::operator+=(const Vector& other) {
    require_same_dim(dim(), other.dim(), "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Vector& Vector::operator-=(const Vector& other) {
    require_same_dim(dim(), other.dim(), "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Vector& Vector::operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator*(Vector a, double s) { return a *= s; }
Vector operator*(double s, Vector a) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size(), "dot");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double dot(const Vector& a, const Vector& b) { return dot(a.values(), b.values()); }

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

double squared_distance(const Vector& a, const Vector& b) {
    require_same_dim(a.dim(), b.dim(), "distance");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

double distance(const Vector& a, const Vector& b) { return std::sqrt(squared_distance(a, b)); }

double cosine(const Vector& a, const Vector& b) {
    require_same_dim(a.dim(), b.dim(), "cosine");
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroNormError("cosine: zero-norm input");
    const double c = dot(a, b) / (na * nb);
    return std::fmax(-1.0, std::fmin(1.0, c));
}

Vector normalized(const Vector& a) {
    const double n = norm(a);
    if (n == 0.0) throw ZeroNormError("normalized: zero-norm input");
    Vector out = a;
    for (double& v : out) v /= n;
    return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require_same_dim(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> values) noexcept {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace flowalign
