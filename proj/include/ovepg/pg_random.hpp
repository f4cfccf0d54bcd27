#pragma once

#include "ovepg/rng.hpp"

namespace ovepg {

/// Parameters of the Polya-Gamma distribution PG(b, c): positive integer
/// shape b and real tilt c. The law depends on c only through c^2.
struct PgParams {
    int b = 1;
    double c = 0.0;
};

/// E[PG(b, c)] = b/(2c) * tanh(c/2), continuously extended to b/4 at c = 0.
double pg_mean(int b, double c);

/// One exact draw from PG(1, c), any finite c. Alternating-series rejection
/// sampler on the tilted Jacobi density (exact, no truncation bias).
double sample_pg1(double c, RngStream& rng);

/// PG(b, c) for integer b >= 1 as a sum of b independent PG(1, c) draws.
double sample_pg(int b, double c, RngStream& rng);

/// Approximate draw from the truncated Gamma-convolution representation
///   omega ~= (1 / 2 pi^2) * sum_{k=1..terms} Ga(b, 1) / ((k - 1/2)^2 + c^2 / (4 pi^2)).
/// Bias decreases monotonically in `terms`; used as an independent
/// correctness oracle for sample_pg1.
double sample_pg_oracle(int b, double c, int terms, RngStream& rng);

}  // namespace ovepg
