#pragma once

// ============================================================================
// Exact, closed-form property evaluators for the warm-up problems: root
// counting for eps*x^2 - delta on [-1,1], a constant convexity certificate,
// and the mixed second-difference quotient with its sign limits. These double
// as ground-truth oracles for the sweep engine.
// ============================================================================

#include <functional>

#include "dlimit/types.hpp"

namespace dlimit::classical {

/// Number of roots of eps*x^2 - delta in [-1, 1], counted with multiplicity.
/// Exactly 2 iff delta <= eps (the boundary belongs to the two-root region),
/// else 0.
int root_count_unit_interval(const ParamPoint& p);

/// x -> x^4 + eps*x^2 + delta is convex for every parameter choice; the
/// property value is constantly 1.
int convexity_property(const ParamPoint& p);

/// Mixed second-difference quotient of g(x,y) = xy(x^2-y^2)/(x^2+y^2)
/// (g(0,0)=0) at the origin, with the delta-increment on the first argument
/// and the eps-increment on the second:
///   Q(eps, delta) = g(delta, eps) / (delta*eps) = (delta^2 - eps^2) /
///                   (delta^2 + eps^2).
/// Closed form, no cancellation. Limits: -1 when delta = o(eps), +1 when
/// delta >> eps, 0 identically along delta = eps. Antisymmetric under
/// swapping the increments: Q(a,b) = -Q(b,a).
double clairaut_quotient(double eps, double delta);

/// Value of the quotient along a scaling path delta(eps) at the given eps.
double clairaut_property(const std::function<double(double)>& delta_of_eps,
                         double eps);

}  // namespace dlimit::classical
