#include "capmax/link_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "capmax/units.hpp"

namespace capmax {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace

ChannelGrid ChannelGrid::standard() {
  ChannelGrid grid;
  grid.center_frequencies_hz.resize(grid.channel_count);
  for (std::size_t k = 0; k < grid.channel_count; ++k) {
    grid.center_frequencies_hz[k] = 191.55e12 + 100e9 * static_cast<double>(k);
  }
  return grid;
}

double ChannelGrid::band_position(std::size_t k) const {
  const double lo = center_frequencies_hz.front();
  const double hi = center_frequencies_hz.back();
  return (center_frequencies_hz[k] - lo) / (hi - lo);
}

void ChannelGrid::validate() const {
  require(channel_count >= 2, "channel grid needs at least two channels");
  require(slot_width_hz > 0.0, "slot width must be positive");
  require(reference_bandwidth_hz > 0.0, "reference bandwidth must be positive");
  require(center_frequencies_hz.size() == channel_count,
          "center frequency count does not match channel count");
  for (std::size_t k = 1; k < channel_count; ++k) {
    require(center_frequencies_hz[k] > center_frequencies_hz[k - 1],
            "center frequencies must be strictly increasing");
  }
}

void EdfaParams::validate(std::size_t channel_count) const {
  require(small_signal_gain_db.size() == channel_count,
          "gain shape length does not match channel count");
  require(noise_figure_db.size() == channel_count,
          "noise figure length does not match channel count");
  require(all_finite(small_signal_gain_db), "gain shape must be finite");
  require(std::isfinite(saturated_output_dbm),
          "saturated output power must be finite");
  for (double nf : noise_figure_db) {
    require(std::isfinite(nf) && nf >= 3.0,
            "noise figure below the 3 dB quantum limit");
  }
  if (gff_loss_db) {
    require(gff_loss_db->size() == channel_count,
            "GFF loss length does not match channel count");
    for (double loss : *gff_loss_db) {
      require(std::isfinite(loss) && loss >= 0.0, "GFF loss must be >= 0 dB");
    }
  }
}

void LinkConfig::validate() const {
  require(span_count >= 1, "link needs at least one span");
  require(span_loss_db > 0.0 && std::isfinite(span_loss_db),
          "span loss must be positive");
  grid.validate();
  edfa.validate(grid.channel_count);
}

PowerProfile PowerProfile::from_dbm(std::vector<double> powers_dbm) {
  PowerProfile profile;
  profile.powers_dbm = std::move(powers_dbm);
  profile.total_power_dbm = mw_to_dbm(profile.total_power_mw());
  return profile;
}

PowerProfile PowerProfile::from_mw(std::span<const double> powers_mw) {
  return from_dbm(mw_to_dbm(powers_mw));
}

PowerProfile PowerProfile::flat(std::size_t channel_count,
                                double total_power_dbm) {
  PowerProfile profile;
  const double per_channel =
      total_power_dbm - linear_to_db(static_cast<double>(channel_count));
  profile.powers_dbm.assign(channel_count, per_channel);
  profile.total_power_dbm = total_power_dbm;
  return profile;
}

std::vector<double> PowerProfile::powers_mw() const {
  return dbm_to_mw(powers_dbm);
}

double PowerProfile::total_power_mw() const { return sum(powers_mw()); }

double PowerProfile::excursion_db() const {
  const auto [lo, hi] = std::minmax_element(powers_dbm.begin(), powers_dbm.end());
  return *hi - *lo;
}

void PowerProfile::validate(double rel_tol) const {
  require(!powers_dbm.empty(), "empty power profile");
  require(all_finite(powers_dbm) && std::isfinite(total_power_dbm),
          "power profile has non-finite entries");
  const double declared = dbm_to_mw(total_power_dbm);
  const double actual = total_power_mw();
  if (std::abs(actual - declared) > rel_tol * declared) {
    throw std::invalid_argument("power profile violates its total-power constraint");
  }
}

std::vector<double> RxObservation::snr_linear() const {
  std::vector<double> snr(signal_dbm.size());
  for (std::size_t k = 0; k < snr.size(); ++k) {
    snr[k] = db_to_linear(signal_dbm[k] - noise_dbm[k]);
  }
  return snr;
}

double ase_power_mw(double noise_figure_db, double gain_db, double frequency_hz,
                    double reference_bandwidth_hz) {
  const double excess = std::max(db_to_linear(gain_db) - 1.0, 0.0);
  const double watts = db_to_linear(noise_figure_db) * kPlanck * frequency_hz *
                       excess * reference_bandwidth_hz;
  return watts * 1e3;
}

AmplifierOutput amplify(std::span<const double> signal_mw,
                        std::span<const double> noise_mw,
                        const EdfaParams& params, const ChannelGrid& grid) {
  const std::size_t n = grid.channel_count;
  if (signal_mw.size() != n || noise_mw.size() != n) {
    throw std::invalid_argument("amplifier input length does not match grid");
  }
  if (!all_finite(signal_mw) || !all_finite(noise_mw)) {
    throw std::invalid_argument("non-finite amplifier input");
  }
  double carried_in = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (signal_mw[k] < 0.0 || noise_mw[k] < 0.0) {
      throw std::invalid_argument("negative amplifier input");
    }
    carried_in += signal_mw[k] + noise_mw[k];
  }
  if (carried_in <= 0.0) throw std::invalid_argument("no optical input");

  double unsaturated_out = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    unsaturated_out += (signal_mw[k] + noise_mw[k]) *
                       db_to_linear(params.small_signal_gain_db[k]);
  }
  const double ceiling = dbm_to_mw(params.saturated_output_dbm);
  const double compression_db =
      unsaturated_out > ceiling ? linear_to_db(unsaturated_out / ceiling) : 0.0;

  AmplifierOutput out;
  out.signal_mw.resize(n);
  out.noise_mw.resize(n);
  out.added_ase_mw.resize(n);
  out.gain_db.resize(n);
  out.compression_db = compression_db;
  for (std::size_t k = 0; k < n; ++k) {
    const double gain_db = params.small_signal_gain_db[k] - compression_db;
    const double gain = db_to_linear(gain_db);
    double ase = params.ase_enabled
                     ? ase_power_mw(params.noise_figure_db[k], gain_db,
                                    grid.center_frequencies_hz[k],
                                    grid.reference_bandwidth_hz)
                     : 0.0;
    double signal = signal_mw[k] * gain;
    double noise = noise_mw[k] * gain;
    if (params.gff_loss_db) {
      const double filter = db_to_linear(-(*params.gff_loss_db)[k]);
      signal *= filter;
      noise *= filter;
      ase *= filter;
    }
    out.gain_db[k] = gain_db;
    out.signal_mw[k] = signal;
    out.added_ase_mw[k] = ase;
    out.noise_mw[k] = noise + ase;
  }
  return out;
}

AmplifierOutput amplify(std::span<const double> signal_mw,
                        const EdfaParams& params, const ChannelGrid& grid) {
  const std::vector<double> no_noise(signal_mw.size(), 0.0);
  return amplify(signal_mw, no_noise, params, grid);
}

RxObservation transmit(const PowerProfile& profile, const LinkConfig& config) {
  if (profile.size() != config.grid.channel_count) {
    throw std::invalid_argument("profile length does not match channel grid");
  }
  std::vector<double> signal = profile.powers_mw();
  std::vector<double> noise(signal.size(), 0.0);
  const double span_transmission = db_to_linear(-config.span_loss_db);
  for (std::size_t span = 0; span < config.span_count; ++span) {
    for (std::size_t k = 0; k < signal.size(); ++k) {
      signal[k] *= span_transmission;
      noise[k] *= span_transmission;
    }
    AmplifierOutput stage = amplify(signal, noise, config.edfa, config.grid);
    signal = std::move(stage.signal_mw);
    noise = std::move(stage.noise_mw);
  }
  return RxObservation{mw_to_dbm(signal), mw_to_dbm(noise)};
}

double pce(double optical_in_mw, double optical_out_mw,
           double electrical_pump_mw) {
  if (!(electrical_pump_mw > 0.0)) {
    throw std::invalid_argument("electrical pump power must be positive");
  }
  if (optical_in_mw < 0.0) {
    throw std::invalid_argument("optical input power must be >= 0");
  }
  if (optical_out_mw < optical_in_mw) throw std::invalid_argument("net-loss device");
  return (optical_out_mw - optical_in_mw) / electrical_pump_mw;
}

}  // namespace capmax
