#pragma once

namespace bn2mf {

// Thread-safe log-gamma. std::lgamma may write the global signgam on glibc,
// so a reentrant variant is used where available.
double log_gamma(double x);

// Digamma for x > 0. Recurrence up to x >= 10 followed by the asymptotic
// expansion; relative accuracy is better than 1e-13 on [1e-6, 1e6].
double digamma(double x);

}  // namespace bn2mf
