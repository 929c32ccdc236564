#include "cvarsmd/simplex.hpp"

#include "cvarsmd/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace cvarsmd {

SimplexVector SimplexVector::uniform(std::size_t m) {
    if (m == 0) throw Error(ErrorCode::InvalidParams, "simplex dimension must be >= 1");
    return SimplexVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

SimplexVector SimplexVector::from_weights(std::vector<double> w, double tol) {
    if (w.empty()) throw Error(ErrorCode::InvalidParams, "simplex dimension must be >= 1");
    if (!on_simplex(w, tol)) throw Error(ErrorCode::InvalidParams, "weights are not on the probability simplex");
    return SimplexVector(std::move(w));
}

SimplexVector SimplexVector::normalized(std::vector<double> w) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "weights must be finite and >= 0");
        sum += x;
    }
    if (!(sum > 0.0)) throw Error(ErrorCode::InvalidParams, "weights sum to zero");
    for (double& x : w) x /= sum;
    return SimplexVector(std::move(w));
}

double SimplexVector::min_weight() const {
    return w_.empty() ? 0.0 : *std::min_element(w_.begin(), w_.end());
}

bool on_simplex(std::span<const double> w, double tol) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

void simplex_project_inplace(std::span<double> y, std::vector<double>& scratch) {
    for (double x : y)
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "projection input is not finite");
    if (y.empty()) return;
    // Points already feasible up to rounding are fixed points; this keeps the
    // projection exactly idempotent.
    if (on_simplex(y, 4.0 * static_cast<double>(y.size()) * std::numeric_limits<double>::epsilon())) return;
    scratch.assign(y.begin(), y.end());
    std::sort(scratch.begin(), scratch.end(), std::greater<>());
    // Largest rho with s_rho - (sum_{j<=rho} s_j - 1)/rho > 0.
    double cumulative = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < scratch.size(); ++j) {
        cumulative += scratch[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (scratch[j] - candidate > 0.0) tau = candidate;
    }
    for (double& x : y) x = std::max(0.0, x - tau);
}

SimplexVector simplex_project(std::span<const double> y) {
    std::vector<double> w(y.begin(), y.end());
    if (w.empty()) throw Error(ErrorCode::InvalidParams, "simplex dimension must be >= 1");
    std::vector<double> scratch;
    simplex_project_inplace(w, scratch);
    return SimplexVector::from_weights(std::move(w), 1e-12);
}

} // namespace cvarsmd
