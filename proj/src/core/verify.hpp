#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "adjoint.hpp"
#include "report.hpp"

namespace heatlab {

// Every estimate takes its parameter grid as JSON. Missing keys get
// defaults, and the completed grid is stored in the report, so a report can
// be regenerated from (environment, grid) alone.
using Grid = nlohmann::json;

// Tail mass T(n, R) = sum_{|x-y| > R} p_n(x, y) and the fit
// log T ~ log C - c R^2 / n.
EstimateReport verify_mass_escape(const Environment& env, const Grid& grid);

// Normalized ratio fit, in-ball mass radius A_n, on-diagonal ratio and a
// chaining walk through intermediate points.
EstimateReport verify_gaussian(const Environment& env, const AdjointSolution& M, const Grid& grid);

// Volume, local adjoint, Green and heat-mass doubling constants across r.
EstimateReport verify_doubling(const Environment& env, const AdjointSolution& M, const Grid& grid);

// sup/inf constants for nonnegative caloric and adjoint solutions.
EstimateReport verify_harnack_parabolic(const Environment& env, const Grid& grid);
EstimateReport verify_harnack_adjoint(const Environment& env, const AdjointSolution& M, const Grid& grid);
EstimateReport verify_harnack_backward(const Environment& env, const Grid& grid);
EstimateReport verify_harnack_boundary(const Environment& env, const Grid& grid);

// Boundary behaviour in Omega = B_{R0}(y0) near Y = (y, s), y on dOmega.
EstimateReport verify_carleson(const Environment& env, const Grid& grid);
EstimateReport verify_caloric_lower(const Environment& env, const Grid& grid);
EstimateReport verify_decay(const Environment& env, const Grid& grid);
EstimateReport verify_exit_split(const Environment& env, const Grid& grid);
EstimateReport verify_comparability(const Environment& env, const Grid& grid);
EstimateReport verify_shift_monotone(const Environment& env, const Grid& grid);

// Random nonnegative boundary problems; the interior minimum must stay >= 0.
EstimateReport verify_maximum_principle(const Environment& env, const Grid& grid);

// Names accepted by run_estimate, in a fixed order.
const std::vector<std::string>& estimate_names();
bool estimate_needs_adjoint(const std::string& name);
// Dispatches by name; `M` may be null for estimates that do not need it.
EstimateReport run_estimate(const std::string& name, const Environment& env, const AdjointSolution* M,
                            const Grid& grid);

// Boundary point of B_{R0}(y0) nearest to y0 + R0 * direction; ties broken
// lexicographically.
Point boundary_point(const Environment& env, double R0, const Point& y0, const Point& direction);
// Lattice point of Omega within distance 1 of y0 + (R0 - r/2) u, u the unit
// vector from y0 to y; the nearest such point, ties broken lexicographically.
Point inner_point(const Environment& env, double R0, const Point& y0, const Point& y, double r);

}  // namespace heatlab
