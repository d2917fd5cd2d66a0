#include "capmax/units.hpp"

#include <cmath>
#include <numeric>

namespace capmax {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }

double dbm_to_mw(double dbm) { return db_to_linear(dbm); }

double mw_to_dbm(double mw) { return linear_to_db(mw); }

std::vector<double> dbm_to_mw(std::span<const double> dbm) {
  std::vector<double> out(dbm.size());
  for (std::size_t i = 0; i < dbm.size(); ++i) out[i] = dbm_to_mw(dbm[i]);
  return out;
}

std::vector<double> mw_to_dbm(std::span<const double> mw) {
  std::vector<double> out(mw.size());
  for (std::size_t i = 0; i < mw.size(); ++i) out[i] = mw_to_dbm(mw[i]);
  return out;
}

double sum(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

}  // namespace capmax
