#include "capmax/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "capmax/csv.hpp"
#include "capmax/units.hpp"

namespace capmax {

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must be in (0, 1]");
}

}  // namespace

std::vector<double> channel_capacities(std::span<const double> snr_linear,
                                       double symbol_rate_hz, double eta) {
  check_eta(eta);
  if (!(symbol_rate_hz > 0.0)) throw std::invalid_argument("symbol rate must be positive");
  std::vector<double> out(snr_linear.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(snr_linear[k] >= 0.0)) throw std::invalid_argument("negative SNR");
    out[k] = 2.0 * symbol_rate_hz * std::log2(1.0 + eta * snr_linear[k]);
  }
  return out;
}

double capacity(std::span<const double> snr_linear, double symbol_rate_hz, double eta) {
  return sum(channel_capacities(snr_linear, symbol_rate_hz, eta));
}

double cable_capacity(double snr_linear, int spatial_paths, double bandwidth_hz) {
  if (spatial_paths < 1) throw std::invalid_argument("need at least one spatial path");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (!(snr_linear >= 0.0)) throw std::invalid_argument("negative SNR");
  return 2.0 * spatial_paths * bandwidth_hz * std::log2(1.0 + snr_linear);
}

double combine_snr(double snr_trx, double snr_line, double eta) {
  check_eta(eta);
  if (!(snr_trx > 0.0) || !(snr_line > 0.0)) {
    throw std::invalid_argument("SNR terms must be positive");
  }
  const double trx_term = std::isinf(snr_trx) ? 0.0 : 1.0 / (eta * snr_trx);
  return 1.0 / (trx_term + 1.0 / snr_line);
}

double power_efficiency(double capacity_bps, double electrical_power_w) {
  if (!(electrical_power_w > 0.0)) {
    throw std::invalid_argument("electrical power must be positive");
  }
  return capacity_bps / electrical_power_w;
}

std::vector<OsaSlot> bracket_interleaved(std::span<const double> trace_dbm) {
  if (trace_dbm.size() < 5 || trace_dbm.size() % 2 == 0) {
    throw std::invalid_argument(
        "interleaved trace needs 2K-1 slots with at least 3 signal slots");
  }
  const std::size_t channels = (trace_dbm.size() + 1) / 2;
  std::vector<double> empty(channels - 1);
  for (std::size_t j = 0; j + 1 < channels; ++j) empty[j] = trace_dbm[2 * j + 1];

  std::vector<OsaSlot> slots(channels);
  for (std::size_t k = 0; k < channels; ++k) {
    slots[k].slot_dbm = trace_dbm[2 * k];
    slots[k].left_empty_dbm = k > 0 ? empty[k - 1] : 2.0 * empty[0] - empty[1];
    slots[k].right_empty_dbm =
        k + 1 < channels ? empty[k] : 2.0 * empty[channels - 2] - empty[channels - 3];
  }
  return slots;
}

OsaEstimate estimate_snr_osa(std::span<const OsaSlot> slots) {
  OsaEstimate est;
  est.signal_mw.resize(slots.size());
  est.noise_mw.resize(slots.size());
  est.snr_linear.resize(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double noise = dbm_to_mw(0.5 * (slots[k].left_empty_dbm + slots[k].right_empty_dbm));
    const double signal = dbm_to_mw(slots[k].slot_dbm) - noise;
    if (!(signal > 0.0)) {
      throw std::domain_error("non-positive signal in slot " + std::to_string(k));
    }
    est.signal_mw[k] = signal;
    est.noise_mw[k] = noise;
    est.snr_linear[k] = signal / noise;
  }
  return est;
}

CapacityReport CapacityReport::from_snr(std::vector<double> snr_linear,
                                        double symbol_rate_hz, double eta,
                                        std::optional<double> electrical_power_w) {
  CapacityReport report;
  report.per_channel_capacity_bps = channel_capacities(snr_linear, symbol_rate_hz, eta);
  report.total_capacity_bps = sum(report.per_channel_capacity_bps);
  report.per_channel_snr = std::move(snr_linear);
  report.eta = eta;
  report.symbol_rate_hz = symbol_rate_hz;
  if (electrical_power_w) {
    report.power_efficiency_bps_per_w =
        power_efficiency(report.total_capacity_bps, *electrical_power_w);
  }
  return report;
}

std::string CapacityReport::to_json() const {
  nlohmann::json j;
  j["per_channel_snr"] = per_channel_snr;
  j["per_channel_capacity_bps"] = per_channel_capacity_bps;
  j["total_capacity_bps"] = total_capacity_bps;
  j["eta"] = eta;
  j["symbol_rate_hz"] = symbol_rate_hz;
  if (power_efficiency_bps_per_w) {
    j["power_efficiency_bps_per_w"] = *power_efficiency_bps_per_w;
  } else {
    j["power_efficiency_bps_per_w"] = nullptr;
  }
  return j.dump(2);
}

std::vector<std::string> CapacityReport::csv_header() {
  return {"total_capacity_bps", "power_efficiency_bps_per_w", "eta", "symbol_rate_hz",
          "min_snr_db", "max_snr_db"};
}

std::vector<std::string> CapacityReport::csv_row() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double s : per_channel_snr) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {csv::format_double(total_capacity_bps),
          power_efficiency_bps_per_w ? csv::format_double(*power_efficiency_bps_per_w) : "",
          csv::format_double(eta), csv::format_double(symbol_rate_hz),
          csv::format_double(linear_to_db(lo)), csv::format_double(linear_to_db(hi))};
}

}  // namespace capmax
