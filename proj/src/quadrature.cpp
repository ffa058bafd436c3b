#include "dlimit/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <memory>
#include <mutex>

#include "dlimit/types.hpp"

namespace dlimit::kernel {
namespace {

void disable_gsl_abort() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

double call_thunk(double x, void* params) {
  const auto* fn = static_cast<const std::function<double(double)>*>(params);
  return (*fn)(x);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double abs_tol, double rel_tol) {
  disable_gsl_abort();
  constexpr std::size_t limit = 2000;
  std::unique_ptr<gsl_integration_workspace,
                  decltype(&gsl_integration_workspace_free)>
      ws(gsl_integration_workspace_alloc(limit),
         &gsl_integration_workspace_free);

  gsl_function gf;
  gf.function = &call_thunk;
  gf.params = const_cast<std::function<double(double)>*>(&f);

  double result = 0.0, abserr = 0.0;
  int status = gsl_integration_qag(&gf, a, b, abs_tol, rel_tol, limit,
                                   GSL_INTEG_GAUSS15, ws.get(), &result,
                                   &abserr);
  if (status == GSL_EROUND || status == GSL_EMAXITER) {
    // retry with the 61-point rule before giving up
    status = gsl_integration_qag(&gf, a, b, abs_tol, rel_tol * 10, limit,
                                 GSL_INTEG_GAUSS61, ws.get(), &result, &abserr);
  }
  if (status != GSL_SUCCESS)
    throw NumericalError("QuadratureFailure",
                         std::string("integrate_adaptive: ") + gsl_strerror(status));
  return result;
}

}  // namespace dlimit::kernel
