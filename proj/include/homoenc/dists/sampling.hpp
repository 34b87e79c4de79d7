#pragma once

#include <span>
#include <vector>

#include "homoenc/dists/families.hpp"
#include "homoenc/rng.hpp"

namespace homoenc::dists {

/// Standard normal by the polar method (the second variate is discarded so
/// each call consumes an independent slice of the stream).
double standard_normal(Rng& rng);
std::vector<double> standard_normals(Rng& rng, std::size_t n);

/// Gamma(shape, rate) by Marsaglia-Tsang.
double sample_gamma(Rng& rng, double alpha, double beta);

/// von Mises(mu, kappa) by Best-Fisher rejection; result on (-pi, pi].
double sample_von_mises(Rng& rng, double mu, double kappa);

double family_sample(const FamilyParams<double>& params, Rng& rng);

}  // namespace homoenc::dists
