#pragma once

#include <span>
#include <vector>

namespace capmax {

inline constexpr double kPlanck = 6.62607015e-34;  // J*s, exact (SI 2019)

double db_to_linear(double db);
double linear_to_db(double ratio);
double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

std::vector<double> dbm_to_mw(std::span<const double> dbm);
std::vector<double> mw_to_dbm(std::span<const double> mw);

double sum(std::span<const double> values);

}  // namespace capmax
