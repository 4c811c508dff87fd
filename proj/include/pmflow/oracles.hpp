#pragma once

#include <cstddef>
#include <vector>

#include "pmflow/grid.hpp"
#include "pmflow/phi.hpp"

// Reference implementations kept deliberately naive. They share no code with
// the production integrator or the dynamic program.
namespace pmflow::oracle {

/// Classical fixed-step RK4 on the semi-discrete equation, ghost rules coded
/// inline. The last step is shortened to land on t_end.
GridFunction rk4(const GridFunction& u0, const NonlinearityModel& model, BoundaryCondition bc,
                 double t_end, double dt, double length = 1.0);

/// Exhaustive maximum of Sum_{k=1..2m} (-1)^k u(x_k) over nondecreasing index
/// tuples x_1 <= ... <= x_2m, summed left to right. O(n^{2m}).
double tv_m_plus_brute(const GridFunction& u, int m);

}  // namespace pmflow::oracle
