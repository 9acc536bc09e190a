#pragma once

namespace itolab {

double normal_pdf(double z);
double normal_cdf(double z);
/// Inverse standard normal CDF. Accurate to ~1e-15 relative on (0, 1).
double normal_quantile(double p);

}  // namespace itolab
