#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cvarsmd {

/// Point of the probability simplex: nonnegative weights summing to one.
class SimplexVector {
public:
    SimplexVector() = default;

    static SimplexVector uniform(std::size_t m);

    /// Validates nonnegativity and |sum - 1| <= tol (InvalidParams otherwise).
    static SimplexVector from_weights(std::vector<double> w, double tol = 1e-12);

    /// Divides nonnegative, not-all-zero weights by their sum.
    static SimplexVector normalized(std::vector<double> w);

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    std::span<const double> weights() const noexcept { return w_; }
    const std::vector<double>& vector() const noexcept { return w_; }

    double min_weight() const;

    friend bool operator==(const SimplexVector&, const SimplexVector&) = default;

private:
    explicit SimplexVector(std::vector<double> w) : w_(std::move(w)) {}
    std::vector<double> w_;
};

/// True when all weights are >= 0 and the sum is within tol of 1.
bool on_simplex(std::span<const double> w, double tol = 1e-12);

/// Euclidean projection onto the simplex by sorting and thresholding:
/// w = (y - tau)^+ with tau chosen so the positive parts sum to one.
/// Errors: NonFiniteInput.
SimplexVector simplex_project(std::span<const double> y);

/// In-place projection; `scratch` is resized as needed.
void simplex_project_inplace(std::span<double> y, std::vector<double>& scratch);

} // namespace cvarsmd
