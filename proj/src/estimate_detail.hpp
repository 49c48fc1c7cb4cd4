#pragma once

#include "bsnlr/estimate.hpp"

namespace bsnlr::estimate::detail {

void check_fit_inputs(const MeanModel& model, const Dataset& data);
Theta starting_point(const MeanModel& model, const Dataset& data, const FitConfig& config);
void finalize(FitResult& r, const VectorXd& y);
bool relative_change_small(double l_new, double l_old, double tol);

}  // namespace bsnlr::estimate::detail
