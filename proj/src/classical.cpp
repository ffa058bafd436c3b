#include "dlimit/classical.hpp"

namespace dlimit::classical {

int root_count_unit_interval(const ParamPoint& p) {
  p.validate();
  // roots x = +-sqrt(delta/eps) lie in [-1,1] iff delta/eps <= 1
  return p.second <= p.eps ? 2 : 0;
}

int convexity_property(const ParamPoint& p) {
  p.validate();
  return 1;
}

double clairaut_quotient(double eps, double delta) {
  const double e2 = eps * eps, d2 = delta * delta;
  return (d2 - e2) / (d2 + e2);
}

double clairaut_property(const std::function<double(double)>& delta_of_eps,
                         double eps) {
  return clairaut_quotient(eps, delta_of_eps(eps));
}

}  // namespace dlimit::classical
