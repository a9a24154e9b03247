#pragma once

// automatic proxy construction from forecast residuals.  the first proxy
// is the target itself; each later proxy is the in-sample residual of the
// fit that uses all proxies found so far.  the recursion therefore needs
// L-1 intermediate fits plus the final one, all sharing one Gram.

#include <k3prf/common.hpp>
#include <k3prf/estimator.hpp>
#include <k3prf/kernel.hpp>

#include <string>
#include <vector>

namespace k3prf {

struct AutoProxyTrace {
  MatrixXd proxies;                    // T x L, column k is residual r_k
  std::vector<VectorXd> residuals;     // r_0 .. r_{L-1}, r_0 = y
  std::vector<VectorXd> forecasts;     // in-sample y_hat for 1..L proxies
  K3prfFit final_fit;                  // fit with all L proxies
};

inline AutoProxyTrace build_auto_proxies(const MatrixXd& X, const VectorXd& y,
                                         const KernelSpec& spec, int L) {
  if (L < 1) throw InvalidInput("build_auto_proxies: L must be >= 1");
  const Eigen::Index T = X.rows();
  if (y.size() != T) throw InvalidInput("build_auto_proxies: row mismatch");

  const GramMatrix K = gram(spec, X);

  AutoProxyTrace trace;
  trace.proxies.resize(T, L);
  trace.residuals.reserve(static_cast<std::size_t>(L));
  trace.forecasts.reserve(static_cast<std::size_t>(L));

  VectorXd r = y;  // r_0
  for (int k = 1; k <= L; ++k) {
    trace.residuals.push_back(r);
    trace.proxies.col(k - 1) = r;
    K3prfFit fit;
    try {
      fit = fit_with_gram(X, K, y,
                          ProxySet::automatic(trace.proxies.leftCols(k)), spec);
    } catch (const NumericalError& e) {
      throw NumericalError("auto-proxy step " + std::to_string(k) + ": " +
                           e.what());
    }
    const VectorXd y_hat = fitted_values(fit);
    trace.forecasts.push_back(y_hat);
    if (k == L) {
      trace.final_fit = std::move(fit);
      break;
    }
    r = y - y_hat;  // r_k feeds proxy k+1
  }
  return trace;
}

}  // namespace k3prf
