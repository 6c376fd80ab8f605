#pragma once

#include <cstddef>
#include <vector>

namespace dyncontract {

/// Upper concave envelope of (x, y) evaluated back at x. Entries equal to
/// -inf are ignored; knots outside the finite range stay -inf.
std::vector<double> upper_concave_envelope(const std::vector<double>& x, const std::vector<double>& y);

/// Piecewise-linear interpolation through (x, y); x strictly increasing.
double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at);

/// Index m of the segment [x[m], x[m+1]] lying to the right of `at`.
std::size_t right_segment(const std::vector<double>& x, double at);

bool is_concave(const std::vector<double>& x, const std::vector<double>& y, double tol);

}  // namespace dyncontract
